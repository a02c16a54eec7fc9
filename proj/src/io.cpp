#include "rigidda/io.hpp"

#include <json.hpp>

#include <Eigen/SVD>

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

namespace rigidda {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "little-endian host required");

namespace {

constexpr int kHeaderSize = 348;
constexpr int kDataOffset = 352;
constexpr std::int16_t kDtUint8 = 2;
constexpr std::int16_t kDtInt16 = 4;
constexpr std::int16_t kDtFloat32 = 16;
constexpr std::int16_t kDtFloat64 = 64;
constexpr double kFloatGeometryTol = 1e-4;

enum class Format { Nifti, Sidecar };

Format format_of(const fs::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".nii") return Format::Nifti;
  if (ext == ".json" || ext == ".raw") return Format::Sidecar;
  throw IoError(IoErrorCode::UnsupportedFormat, p.string() + " (expected .nii, .json or .raw)");
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError(IoErrorCode::NotFound, p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void dump(const fs::path& p, const char* data, std::size_t n) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(IoErrorCode::WriteFailed, p.string());
  out.write(data, std::streamsize(n));
  out.flush();
  if (!out) throw IoError(IoErrorCode::WriteFailed, p.string());
}

template <typename T>
T get(const std::vector<char>& b, std::size_t off) {
  T v;
  std::memcpy(&v, b.data() + off, sizeof(T));
  return v;
}

template <typename T>
void put(std::vector<char>& b, std::size_t off, T v) {
  std::memcpy(b.data() + off, &v, sizeof(T));
}

// Geometry from a float sform: spacing = column norms, direction projected to
// the nearest orthonormal matrix.
GridGeometry geometry_from_sform(const Shape& shape, const Eigen::Matrix<double, 3, 4>& s,
                                 const fs::path& p) {
  GridGeometry g;
  g.shape = shape;
  const Eigen::Matrix3d a = s.leftCols<3>();
  for (int k = 0; k < 3; ++k) g.spacing[k] = a.col(k).norm();
  if (!g.spacing.allFinite() || (g.spacing.array() <= 0.0).any())
    throw IoError(IoErrorCode::MalformedHeader, p.string() + ": degenerate sform");
  const Eigen::Matrix3d d = a * g.spacing.cwiseInverse().asDiagonal();
  if ((d.transpose() * d - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > kFloatGeometryTol)
    throw IoError(IoErrorCode::NonOrthonormalDirection, p.string());
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(d, Eigen::ComputeFullU | Eigen::ComputeFullV);
  g.direction = svd.matrixU() * svd.matrixV().transpose();
  // Snap float noise on axis-aligned grids back to exact values.
  for (int i = 0; i < 9; ++i) {
    double& v = g.direction.data()[i];
    const double r = std::round(v);
    if (std::abs(v - r) < 1e-6) v = r;
  }
  for (int k = 0; k < 3; ++k) {
    const double r = std::round(g.spacing[k] * 1e6) / 1e6;
    if (std::abs(g.spacing[k] - r) < 1e-6 * std::max(1.0, r)) g.spacing[k] = r;
  }
  g.origin = s.col(3);
  return g;
}

struct RawVolume {
  GridGeometry geometry;
  VolumeKind kind = VolumeKind::Intensity;
  Eigen::ArrayXd values;
};

void check_labels(const Eigen::ArrayXd& v, const fs::path& p) {
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (!(v[i] >= 0.0 && v[i] < kNumClasses) || v[i] != std::floor(v[i]))
      throw IoError(IoErrorCode::UnknownClassId, p.string());
}

RawVolume read_nifti(const fs::path& p) {
  const std::vector<char> b = slurp(p);
  if (b.size() < std::size_t(kHeaderSize))
    throw IoError(IoErrorCode::MalformedHeader, p.string() + ": file shorter than a header");
  if (get<std::int32_t>(b, 0) != kHeaderSize)
    throw IoError(IoErrorCode::MalformedHeader, p.string() + ": sizeof_hdr is not 348");
  if (std::memcmp(b.data() + 344, "n+1\0", 4) != 0)
    throw IoError(IoErrorCode::MalformedHeader, p.string() + ": bad magic");
  const auto ndim = get<std::int16_t>(b, 40);
  if (ndim < 1 || ndim > 7)
    throw IoError(IoErrorCode::MalformedHeader, p.string() + ": bad dim[0]");
  Shape shape(1, 1, 1);
  for (int k = 0; k < ndim; ++k) {
    const auto n = get<std::int16_t>(b, 42 + 2 * k);
    if (n < 1) throw IoError(IoErrorCode::MalformedHeader, p.string() + ": bad dim");
    if (k < 3) shape[k] = n;
    else if (n != 1)
      throw IoError(IoErrorCode::MalformedHeader, p.string() + ": only 3-D volumes supported");
  }
  const auto dt = get<std::int16_t>(b, 70);
  std::size_t bytes = 0;
  switch (dt) {
    case kDtUint8: bytes = 1; break;
    case kDtInt16: bytes = 2; break;
    case kDtFloat32: bytes = 4; break;
    case kDtFloat64: bytes = 8; break;
    default:
      throw IoError(IoErrorCode::UnsupportedDatatype,
                    p.string() + ": datatype " + std::to_string(dt));
  }
  const float vox_offset = get<float>(b, 108);
  if (!(vox_offset >= float(kHeaderSize)) || vox_offset != std::floor(vox_offset))
    throw IoError(IoErrorCode::MalformedHeader, p.string() + ": bad vox_offset");
  const std::size_t offset = std::size_t(vox_offset);

  Eigen::Matrix<double, 3, 4> sform;
  if (get<std::int16_t>(b, 254) > 0) {
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c) sform(r, c) = get<float>(b, 280 + 16 * r + 4 * c);
  } else {
    sform.setZero();
    for (int k = 0; k < 3; ++k) {
      const float s = get<float>(b, 80 + 4 * k);
      sform(k, k) = s > 0.0f ? s : 1.0;
    }
  }
  RawVolume out;
  out.geometry = geometry_from_sform(shape, sform, p);
  const std::int64_t n = out.geometry.voxel_count();
  if (b.size() < offset + std::size_t(n) * bytes)
    throw IoError(IoErrorCode::TruncatedBuffer, p.string());

  out.values.resize(n);
  const char* d = b.data() + offset;
  for (std::int64_t i = 0; i < n; ++i) {
    switch (dt) {
      case kDtUint8: out.values[i] = double(std::uint8_t(d[i])); break;
      case kDtInt16: out.values[i] = double(get<std::int16_t>(b, offset + 2 * i)); break;
      case kDtFloat32: out.values[i] = double(get<float>(b, offset + 4 * i)); break;
      case kDtFloat64: out.values[i] = get<double>(b, offset + 8 * i); break;
    }
  }
  const float slope = get<float>(b, 112), inter = get<float>(b, 116);
  const bool scaled = slope != 0.0f && std::isfinite(slope) && (slope != 1.0f || inter != 0.0f);
  if (scaled) out.values = out.values * double(slope) + double(inter);
  const bool integral = dt == kDtUint8 || dt == kDtInt16;
  out.kind = integral && !scaled && get<std::int16_t>(b, 68) == 1002 ? VolumeKind::Label
                                                                    : VolumeKind::Intensity;
  return out;
}

void write_nifti(const GridGeometry& g, const Eigen::ArrayXd& values, VolumeKind kind,
                 const fs::path& p) {
  if ((g.shape > 32767).any())
    throw IoError(IoErrorCode::WriteFailed, p.string() + ": axis too long for NIfTI-1");
  const bool label = kind == VolumeKind::Label;
  const std::size_t bytes = label ? 2 : 4;
  std::vector<char> b(kDataOffset + std::size_t(values.size()) * bytes, 0);
  put<std::int32_t>(b, 0, kHeaderSize);
  b[38] = 'r';
  put<std::int16_t>(b, 40, 3);
  for (int k = 0; k < 3; ++k) put<std::int16_t>(b, 42 + 2 * k, std::int16_t(g.shape[k]));
  for (int k = 4; k < 8; ++k) put<std::int16_t>(b, 40 + 2 * k, 1);
  put<std::int16_t>(b, 68, label ? 1002 : 0);  // NIFTI_INTENT_LABEL
  put<std::int16_t>(b, 70, label ? kDtInt16 : kDtFloat32);
  put<std::int16_t>(b, 72, std::int16_t(8 * bytes));
  put<float>(b, 76, 1.0f);
  for (int k = 0; k < 3; ++k) put<float>(b, 80 + 4 * k, float(g.spacing[k]));
  put<float>(b, 108, float(kDataOffset));
  put<float>(b, 112, 1.0f);
  b[123] = 2;  // mm
  put<std::int16_t>(b, 254, 1);
  const Affine w = g.world_from_voxel();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) put<float>(b, 280 + 16 * r + 4 * c, float(w(r, c)));
  std::memcpy(b.data() + 344, "n+1\0", 4);
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (label) put<std::int16_t>(b, kDataOffset + 2 * i, std::int16_t(values[i]));
    else put<float>(b, kDataOffset + 4 * i, float(values[i]));
  }
  dump(p, b.data(), b.size());
}

std::pair<fs::path, fs::path> sidecar_paths(const fs::path& p) {
  fs::path json_path = p, raw_path = p;
  json_path.replace_extension(".json");
  raw_path.replace_extension(".raw");
  return {json_path, raw_path};
}

template <typename Vec>
Vec json_vector(const json& j, const char* key, const fs::path& p) {
  try {
    const auto v = j.at(key).get<std::vector<double>>();
    Vec out;
    if (v.size() != std::size_t(out.size()))
      throw IoError(IoErrorCode::MalformedHeader, p.string() + ": bad '" + key + "'");
    for (std::size_t i = 0; i < v.size(); ++i) out[Eigen::Index(i)] = v[i];
    return out;
  } catch (const json::exception&) {
    throw IoError(IoErrorCode::MalformedHeader, p.string() + ": bad '" + key + "'");
  }
}

RawVolume read_sidecar(const fs::path& p) {
  const auto [json_path, raw_path] = sidecar_paths(p);
  const std::vector<char> text = slurp(json_path);
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::exception& e) {
    throw IoError(IoErrorCode::MalformedHeader, json_path.string() + ": " + e.what());
  }
  RawVolume out;
  GridGeometry& g = out.geometry;
  const Eigen::Vector3d shape = json_vector<Eigen::Vector3d>(j, "shape", json_path);
  if ((shape.array() < 1.0).any() || (shape.array() != shape.array().floor()).any() ||
      (shape.array() > 1e6).any())
    throw IoError(IoErrorCode::MalformedHeader, json_path.string() + ": bad 'shape'");
  g.shape = shape.cast<int>().array();
  g.spacing = json_vector<Eigen::Vector3d>(j, "spacing", json_path);
  g.origin = json_vector<Eigen::Vector3d>(j, "origin", json_path);
  std::vector<std::vector<double>> rows;
  try {
    rows = j.at("direction").get<std::vector<std::vector<double>>>();
  } catch (const json::exception&) {
  }
  if (rows.size() != 3 || rows[0].size() != 3 || rows[1].size() != 3 || rows[2].size() != 3)
    throw IoError(IoErrorCode::MalformedHeader, json_path.string() + ": bad 'direction'");
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) g.direction(r, c) = rows[r][c];
  if (!g.spacing.allFinite() || (g.spacing.array() <= 0.0).any() || !g.origin.allFinite())
    throw IoError(IoErrorCode::MalformedHeader, json_path.string() + ": bad geometry");
  if (auto msg = g.check(); !msg.empty())
    throw IoError(IoErrorCode::NonOrthonormalDirection, json_path.string() + ": " + msg);

  const std::string kind = j.value("kind", "intensity");
  if (kind == "label") out.kind = VolumeKind::Label;
  else if (kind != "intensity")
    throw IoError(IoErrorCode::MalformedHeader, json_path.string() + ": bad 'kind'");
  const std::string dtype = j.value("dtype", out.kind == VolumeKind::Label ? "uint8" : "float32");
  std::size_t bytes;
  if (dtype == "uint8") bytes = 1;
  else if (dtype == "float32") bytes = 4;
  else throw IoError(IoErrorCode::UnsupportedDatatype, json_path.string() + ": " + dtype);

  const std::vector<char> raw = slurp(raw_path);
  const std::int64_t n = g.voxel_count();
  if (raw.size() < std::size_t(n) * bytes) throw IoError(IoErrorCode::TruncatedBuffer, raw_path.string());
  if (raw.size() > std::size_t(n) * bytes)
    throw IoError(IoErrorCode::MalformedHeader, raw_path.string() + ": buffer longer than shape");
  out.values.resize(n);
  for (std::int64_t i = 0; i < n; ++i)
    out.values[i] = bytes == 1 ? double(std::uint8_t(raw[i])) : double(get<float>(raw, 4 * i));
  return out;
}

void write_sidecar(const GridGeometry& g, const Eigen::ArrayXd& values, VolumeKind kind,
                   const fs::path& p) {
  const auto [json_path, raw_path] = sidecar_paths(p);
  const bool label = kind == VolumeKind::Label;
  json j;
  j["shape"] = {g.shape[0], g.shape[1], g.shape[2]};
  j["spacing"] = {g.spacing[0], g.spacing[1], g.spacing[2]};
  j["origin"] = {g.origin[0], g.origin[1], g.origin[2]};
  json dir = json::array();
  for (int r = 0; r < 3; ++r) dir.push_back({g.direction(r, 0), g.direction(r, 1), g.direction(r, 2)});
  j["direction"] = dir;
  j["kind"] = label ? "label" : "intensity";
  j["dtype"] = label ? "uint8" : "float32";
  std::vector<char> raw(std::size_t(values.size()) * (label ? 1 : 4));
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (label) raw[std::size_t(i)] = char(std::uint8_t(values[i]));
    else put<float>(raw, 4 * std::size_t(i), float(values[i]));
  }
  dump(raw_path, raw.data(), raw.size());
  const std::string text = j.dump(2) + "\n";
  dump(json_path, text.data(), text.size());
}

RawVolume read_any(const fs::path& p) {
  return format_of(p) == Format::Nifti ? read_nifti(p) : read_sidecar(p);
}

}  // namespace

Volume read_volume(const fs::path& path) {
  RawVolume r = read_any(path);
  if (!r.values.allFinite())
    throw IoError(IoErrorCode::MalformedHeader, path.string() + ": non-finite intensities");
  return Volume(r.geometry, std::move(r.values));
}

LabelVolume read_labels(const fs::path& path) {
  RawVolume r = read_any(path);
  check_labels(r.values, path);
  return LabelVolume(r.geometry, r.values.cast<std::uint8_t>());
}

VolumeKind peek_kind(const fs::path& path) { return read_any(path).kind; }

void write_volume(const Volume& v, const fs::path& path) {
  v.geometry().validate();
  require_finite(v, "write_volume");
  const Format f = format_of(path);
  if (f == Format::Nifti) write_nifti(v.geometry(), v.data(), VolumeKind::Intensity, path);
  else write_sidecar(v.geometry(), v.data(), VolumeKind::Intensity, path);
}

void write_labels(const LabelVolume& v, const fs::path& path) {
  v.geometry().validate();
  require_known_labels(v);
  const Eigen::ArrayXd values = v.data().cast<double>();
  const Format f = format_of(path);
  if (f == Format::Nifti) write_nifti(v.geometry(), values, VolumeKind::Label, path);
  else write_sidecar(v.geometry(), values, VolumeKind::Label, path);
}

}  // namespace rigidda
