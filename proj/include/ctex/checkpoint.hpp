#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ctex/network.hpp"

namespace ctex {

// Versioned binary parameter container. Layout: the magic string "CTEX1",
// then one record per parameter:
//   u32 name length | name bytes | u8 dtype (0=f32, 1=f64, 2=u8)
//   u32 rank | u64 dims[rank] | payload, little-endian
// Round-trips are bit-exact. u8 records carry text metadata (e.g. the
// architecture description under "meta.*" names).
struct CheckpointRecord {
    enum class DType : std::uint8_t { F32 = 0, F64 = 1, U8 = 2 };

    std::string name;
    DType dtype = DType::F32;
    std::vector<std::uint64_t> dims;
    std::vector<std::uint8_t> bytes;

    std::uint64_t element_count() const {
        std::uint64_t n = 1;
        for (auto d : dims) n *= d;
        return n;
    }
};

class Checkpoint {
public:
    std::vector<CheckpointRecord> records;

    void add_text(const std::string& name, const std::string& text);
    std::string text(const std::string& name) const;  // throws if missing

    template <typename S>
    void add_param(const std::string& name, const Shape& shape, const ArrX<S>& value);
    template <typename S>
    ArrX<S> param(const std::string& name, const Shape& expected_shape) const;

    const CheckpointRecord* find(const std::string& name) const;
    bool has(const std::string& name) const { return find(name) != nullptr; }

    void save(const std::filesystem::path& path) const;
    static Checkpoint load(const std::filesystem::path& path);
};

// Store <-> checkpoint bridges. `to_checkpoint` copies every entry whose name
// starts with `prefix` (empty = all); `load_params` fills matching store
// entries and throws a mismatch error naming expected vs found shapes.
template <typename S>
Checkpoint to_checkpoint(const ParamStore<S>& store, const std::string& prefix = "");
template <typename S>
void load_params(const Checkpoint& ckpt, ParamStore<S>& store);

std::string encoder_config_to_json(const EncoderConfig& cfg);
EncoderConfig encoder_config_from_json(const std::string& text);

}  // namespace ctex
