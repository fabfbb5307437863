#include "ctex/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace ctex {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint IO assumes a little-endian host");

template <typename T>
void write_le(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    return value;
}

constexpr char kMagic[5] = {'C', 'T', 'E', 'X', '1'};

std::size_t dtype_size(CheckpointRecord::DType t) {
    switch (t) {
        case CheckpointRecord::DType::F32: return 4;
        case CheckpointRecord::DType::F64: return 8;
        case CheckpointRecord::DType::U8: return 1;
    }
    throw std::runtime_error("checkpoint: unknown dtype");
}

template <typename S>
constexpr CheckpointRecord::DType dtype_of() {
    if constexpr (sizeof(S) == 4) {
        return CheckpointRecord::DType::F32;
    } else {
        return CheckpointRecord::DType::F64;
    }
}

}  // namespace

void Checkpoint::add_text(const std::string& name, const std::string& text) {
    CheckpointRecord rec;
    rec.name = name;
    rec.dtype = CheckpointRecord::DType::U8;
    rec.dims = {text.size()};
    rec.bytes.assign(text.begin(), text.end());
    records.push_back(std::move(rec));
}

std::string Checkpoint::text(const std::string& name) const {
    const CheckpointRecord* rec = find(name);
    if (!rec || rec->dtype != CheckpointRecord::DType::U8) {
        throw std::runtime_error("checkpoint: missing text record '" + name + "'");
    }
    return std::string(rec->bytes.begin(), rec->bytes.end());
}

template <typename S>
void Checkpoint::add_param(const std::string& name, const Shape& shape, const ArrX<S>& value) {
    if (value.size() != numel(shape)) {
        throw ShapeError("checkpoint: value for '" + name + "' does not match " +
                         shape_str(shape));
    }
    CheckpointRecord rec;
    rec.name = name;
    rec.dtype = dtype_of<S>();
    for (long d : shape) rec.dims.push_back(static_cast<std::uint64_t>(d));
    rec.bytes.resize(static_cast<std::size_t>(value.size()) * sizeof(S));
    std::memcpy(rec.bytes.data(), value.data(), rec.bytes.size());
    records.push_back(std::move(rec));
}

template <typename S>
ArrX<S> Checkpoint::param(const std::string& name, const Shape& expected_shape) const {
    const CheckpointRecord* rec = find(name);
    if (!rec) throw std::runtime_error("checkpoint: missing parameter '" + name + "'");
    if (rec->dtype != dtype_of<S>()) {
        throw std::runtime_error("checkpoint: dtype mismatch for '" + name + "'");
    }
    Shape found;
    for (auto d : rec->dims) found.push_back(static_cast<long>(d));
    if (found != expected_shape) {
        throw std::runtime_error("checkpoint: shape mismatch for '" + name + "': expected " +
                                 shape_str(expected_shape) + ", found " + shape_str(found));
    }
    ArrX<S> value(static_cast<long>(rec->element_count()));
    std::memcpy(value.data(), rec->bytes.data(), rec->bytes.size());
    return value;
}

const CheckpointRecord* Checkpoint::find(const std::string& name) const {
    for (const auto& rec : records) {
        if (rec.name == name) return &rec;
    }
    return nullptr;
}

void Checkpoint::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path.string());
    out.write(kMagic, sizeof(kMagic));
    for (const auto& rec : records) {
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(rec.name.size()));
        out.write(rec.name.data(), static_cast<std::streamsize>(rec.name.size()));
        write_le<std::uint8_t>(out, static_cast<std::uint8_t>(rec.dtype));
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(rec.dims.size()));
        for (auto d : rec.dims) write_le<std::uint64_t>(out, d);
        out.write(reinterpret_cast<const char*>(rec.bytes.data()),
                  static_cast<std::streamsize>(rec.bytes.size()));
    }
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
    char magic[5];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw std::runtime_error("checkpoint: " + path.string() + " is not a CTEX1 file");
    }
    Checkpoint ckpt;
    while (true) {
        std::uint32_t name_len;
        in.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
        if (in.eof()) break;
        if (!in) throw std::runtime_error("checkpoint: truncated file " + path.string());
        CheckpointRecord rec;
        rec.name.resize(name_len);
        in.read(rec.name.data(), name_len);
        rec.dtype = static_cast<CheckpointRecord::DType>(read_le<std::uint8_t>(in));
        const auto rank = read_le<std::uint32_t>(in);
        for (std::uint32_t i = 0; i < rank; ++i) rec.dims.push_back(read_le<std::uint64_t>(in));
        rec.bytes.resize(rec.element_count() * dtype_size(rec.dtype));
        in.read(reinterpret_cast<char*>(rec.bytes.data()),
                static_cast<std::streamsize>(rec.bytes.size()));
        if (!in) throw std::runtime_error("checkpoint: truncated record '" + rec.name + "'");
        ckpt.records.push_back(std::move(rec));
    }
    return ckpt;
}

template <typename S>
Checkpoint to_checkpoint(const ParamStore<S>& store, const std::string& prefix) {
    Checkpoint ckpt;
    for (const auto& e : store.entries) {
        if (!prefix.empty() && e.name.rfind(prefix, 0) != 0) continue;
        ckpt.add_param(e.name, e.shape, e.value);
    }
    return ckpt;
}

template <typename S>
void load_params(const Checkpoint& ckpt, ParamStore<S>& store) {
    for (auto& e : store.entries) {
        e.value = ckpt.param<S>(e.name, e.shape);
    }
}

std::string encoder_config_to_json(const EncoderConfig& cfg) {
    nlohmann::json j;
    j["in_channels"] = cfg.in_channels;
    j["stages"] = nlohmann::json::array();
    for (const auto& st : cfg.stages) {
        j["stages"].push_back({{"out", st.out_channels},
                               {"kernel", st.kernel},
                               {"stride", st.stride},
                               {"pad", st.pad}});
    }
    return j.dump();
}

EncoderConfig encoder_config_from_json(const std::string& text) {
    EncoderConfig cfg;
    const auto j = nlohmann::json::parse(text);
    cfg.in_channels = j.at("in_channels").get<int>();
    for (const auto& st : j.at("stages")) {
        cfg.stages.push_back({st.at("out").get<int>(), st.at("kernel").get<int>(),
                              st.at("stride").get<int>(), st.at("pad").get<int>()});
    }
    return cfg;
}

template void Checkpoint::add_param<float>(const std::string&, const Shape&, const ArrX<float>&);
template void Checkpoint::add_param<double>(const std::string&, const Shape&,
                                            const ArrX<double>&);
template ArrX<float> Checkpoint::param<float>(const std::string&, const Shape&) const;
template ArrX<double> Checkpoint::param<double>(const std::string&, const Shape&) const;
template Checkpoint to_checkpoint<float>(const ParamStore<float>&, const std::string&);
template Checkpoint to_checkpoint<double>(const ParamStore<double>&, const std::string&);
template void load_params<float>(const Checkpoint&, ParamStore<float>&);
template void load_params<double>(const Checkpoint&, ParamStore<double>&);

}  // namespace ctex
