// Volume file I/O.
//
// .nii       NIfTI-1 single file: 348-byte header, sform geometry, data at byte
//            352, float32 intensities / int16 labels. Geometry is stored in
//            float32 and is re-orthonormalized on read.
// .json/.raw sidecar pair: JSON header {shape, spacing, origin, direction,
//            kind, dtype} next to a raw little-endian float32 / uint8 buffer.
//            Geometry round-trips exactly.
#pragma once

#include "rigidda/errors.hpp"
#include "rigidda/volume.hpp"

#include <filesystem>

namespace rigidda {

enum class VolumeKind { Intensity, Label };

// Throws IoError.
Volume read_volume(const std::filesystem::path& path);
LabelVolume read_labels(const std::filesystem::path& path);
VolumeKind peek_kind(const std::filesystem::path& path);

void write_volume(const Volume& v, const std::filesystem::path& path);
void write_labels(const LabelVolume& v, const std::filesystem::path& path);

}  // namespace rigidda
