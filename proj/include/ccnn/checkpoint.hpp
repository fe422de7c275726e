// Copyright 2026 The ccnn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "ccnn/errors.hpp"
#include "ccnn/tensor.hpp"

namespace ccnn {

// Checkpoint layout (little-endian):
//   magic "CCNN" | version u32 | count u32
//   per tensor: name_len u16, name bytes, rank u8, dims u32 each, f32 data
//   trailer u64 = byte length of the payload (everything after the version
//   field, trailer excluded), catching truncation.
inline constexpr uint32_t kCheckpointVersion = 1;

namespace detail {

struct ByteWriter {
    std::vector<unsigned char> buf;
    void u8(uint8_t v) { buf.push_back(v); }
    void u16(uint16_t v) {
        for (int i = 0; i < 2; ++i) buf.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    void u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) buf.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    void u64(uint64_t v) {
        for (int i = 0; i < 8; ++i) buf.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    void f32(float v) {
        uint32_t bits;
        std::memcpy(&bits, &v, 4);
        u32(bits);
    }
    void bytes(const void* p, std::size_t n) {
        const auto* c = static_cast<const unsigned char*>(p);
        buf.insert(buf.end(), c, c + n);
    }
};

struct ByteReader {
    const std::vector<unsigned char>& buf;
    std::size_t pos = 0;
    const std::string& path;

    void need(std::size_t n) const {
        if (pos + n > buf.size())
            throw IoError("checkpoint '" + path + "' truncated at byte " + std::to_string(pos));
    }
    uint8_t u8() {
        need(1);
        return buf[pos++];
    }
    uint16_t u16() {
        need(2);
        uint16_t v = 0;
        for (int i = 0; i < 2; ++i) v |= static_cast<uint16_t>(buf[pos++]) << (8 * i);
        return v;
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(buf[pos++]) << (8 * i);
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf[pos++]) << (8 * i);
        return v;
    }
    float f32() {
        uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
};

}  // namespace detail

using NamedTensors = std::vector<std::pair<std::string, Tensor<float>>>;

inline void save_checkpoint(const std::string& path, const NamedTensors& tensors) {
    detail::ByteWriter w;
    w.bytes("CCNN", 4);
    w.u32(kCheckpointVersion);
    const std::size_t payload_start = w.buf.size();
    w.u32(static_cast<uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        if (name.size() > 0xFFFF) throw ContractError("checkpoint: tensor name too long");
        w.u16(static_cast<uint16_t>(name.size()));
        w.bytes(name.data(), name.size());
        w.u8(static_cast<uint8_t>(t.rank()));
        for (int i = 0; i < t.rank(); ++i) w.u32(static_cast<uint32_t>(t.dim(i)));
        for (long i = 0; i < t.size(); ++i) w.f32(t.data()[i]);
    }
    w.u64(static_cast<uint64_t>(w.buf.size() - payload_start));

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f.write(reinterpret_cast<const char*>(w.buf.data()), static_cast<long>(w.buf.size()));
    if (!f) throw IoError("write failed for '" + path + "'");
}

inline NamedTensors load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "' for reading");
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
    detail::ByteReader r{buf, 0, path};

    r.need(4);
    if (std::memcmp(buf.data(), "CCNN", 4) != 0)
        throw IoError("'" + path + "' is not a checkpoint (bad magic)");
    r.pos = 4;
    const uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw IoError("checkpoint '" + path + "' has unsupported format version " +
                      std::to_string(version));
    const std::size_t payload_start = r.pos;

    const uint32_t count = r.u32();
    NamedTensors out;
    out.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        const uint16_t name_len = r.u16();
        r.need(name_len);
        std::string name(reinterpret_cast<const char*>(buf.data() + r.pos), name_len);
        r.pos += name_len;
        const uint8_t rank = r.u8();
        Shape shape;
        long numel = 1;
        for (uint8_t d = 0; d < rank; ++d) {
            const uint32_t dim = r.u32();
            shape.push_back(static_cast<int>(dim));
            numel *= static_cast<long>(dim);
        }
        std::vector<float> data(static_cast<std::size_t>(numel));
        for (long j = 0; j < numel; ++j) data[static_cast<std::size_t>(j)] = r.f32();
        out.emplace_back(std::move(name), Tensor<float>::from(std::move(shape), std::move(data)));
    }
    const std::size_t payload_len = r.pos - payload_start;
    const uint64_t declared = r.u64();
    if (declared != payload_len)
        throw IoError("checkpoint '" + path + "' payload length mismatch: header says " +
                      std::to_string(declared) + ", found " + std::to_string(payload_len));
    if (r.pos != buf.size())
        throw IoError("checkpoint '" + path + "' has " + std::to_string(buf.size() - r.pos) +
                      " trailing bytes");
    return out;
}

/// Copies checkpoint tensors into same-named destination tensors. Every
/// destination must be present with matching shape, and no extras allowed.
inline void restore_named(const NamedTensors& file, const NamedTensors& dest,
                          const std::string& context) {
    if (file.size() != dest.size())
        throw IoError(context + ": checkpoint has " + std::to_string(file.size()) +
                      " tensors, model expects " + std::to_string(dest.size()));
    for (const auto& [name, t] : dest) {
        const Tensor<float>* found = nullptr;
        for (const auto& [fname, ft] : file)
            if (fname == name) {
                found = &ft;
                break;
            }
        if (!found) throw IoError(context + ": checkpoint is missing tensor '" + name + "'");
        if (found->shape() != t.shape())
            throw IoError(context + ": tensor '" + name + "' has shape " +
                          shape_str(found->shape()) + ", model expects " + shape_str(t.shape()));
        Tensor<float> dst = t;  // handle copy, same storage
        std::copy(found->data(), found->data() + found->size(), dst.data());
    }
}

}  // namespace ccnn
