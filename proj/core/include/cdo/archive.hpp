#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "cdo/nn/module.hpp"

namespace cdo {

// Binary tensor archive used for checkpoints and pretrained weights:
//
//   bytes 0..7    magic "CDOARCH1"
//   bytes 8..15   little-endian uint64 header length L
//   bytes 16..    L bytes of UTF-8 JSON: {"meta": {...}, "tensors": [{"name", "dims", "offset"}]}
//   then          float32 little-endian payload; "offset" counts floats from the payload start
struct Archive {
    nlohmann::json meta = nlohmann::json::object();
    std::vector<std::pair<std::string, Tensor>> tensors;

    const Tensor* find(const std::string& name) const;
};

class ArchiveError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void save_archive(const std::filesystem::path& path, const Archive& archive);
Archive load_archive(const std::filesystem::path& path);

// Snapshot of every named tensor (parameters and buffers).
std::vector<std::pair<std::string, Tensor>> capture_state(const nn::StateList& state);
// Copies tensors by name into `state`; every entry of `state` must be present with a matching
// element count. Extra archive entries are ignored.
void restore_state(nn::StateList& state, const std::vector<std::pair<std::string, Tensor>>& tensors);

}  // namespace cdo
