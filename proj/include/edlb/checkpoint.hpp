#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "edlb/nn.hpp"

namespace edlb {

/// Binary layout, little-endian:
///   "EDLB" u32 version u32 meta_len meta(JSON) u32 count
///   count x { u32 name_len name u32 ndim u64 dims[ndim] u8 dtype(0 = f32) f32 data[] }
struct CheckpointEntry {
    std::string name;
    Shape shape;
    std::vector<float> data;
};

struct Checkpoint {
    std::string meta;  // free-form JSON
    std::vector<CheckpointEntry> entries;

    const CheckpointEntry* find(const std::string& name) const;
};

std::string encode_checkpoint(const ParamList<float>& params, const std::string& meta);
Checkpoint decode_checkpoint(const std::string& bytes);
void save_checkpoint(const std::filesystem::path& path, const ParamList<float>& params, const std::string& meta);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies checkpoint values into the matching leaves. A leaf absent from the
/// checkpoint is an error unless `may_be_missing(name)` holds; a shape
/// mismatch always is. Checkpoint entries without a leaf are ignored.
/// Returns the number of leaves loaded.
std::size_t load_params(const Checkpoint& ckpt, const ParamList<float>& params,
                        const std::function<bool(const std::string&)>& may_be_missing = {});

/// 64-bit FNV-1a of a byte string, as 16 hex digits.
std::string content_hash(const std::string& bytes);

}  // namespace edlb
