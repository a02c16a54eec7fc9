#pragma once

#include "rigidda/errors.hpp"

#include <stdexcept>
#include <string>

namespace rigidda {

template <typename F>
auto run_stage(const char* stage, F&& f) -> decltype(f()) {
  const std::string tag = std::string("[") + stage + "] ";
  try {
    return f();
  } catch (const IoError& e) {
    throw IoError(e.code(), tag + e.detail());
  } catch (const NumericalError& e) {
    throw NumericalError(tag + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(tag + e.what());
  }
}

}  // namespace rigidda
