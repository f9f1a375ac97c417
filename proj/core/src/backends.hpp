#pragma once

#include <memory>

#include "syncap/captioner.hpp"

namespace syncap::cap::detail {

template <class T>
std::unique_ptr<Captioner<T>> make_recurrent(const ModelConfig& cfg);
template <class T>
std::unique_ptr<Captioner<T>> make_transformer(const ModelConfig& cfg);

}  // namespace syncap::cap::detail
