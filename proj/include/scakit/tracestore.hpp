/*
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 * This file is part of scakit, a side-channel analysis toolkit.
 */

// Persistent trace-set storage, chunk-iterable for one-pass streaming.
//
// File layout (all integers little-endian):
//   [0,4)   magic "BCTR"
//   [4,6)   version (1)
//   [6,7)   sample dtype (0 = f32)
//   [7,8)   reserved
//   [8,16)  n_traces
//   [16,20) samples_per_trace
//   [20,24) reserved
//   [24,32) metadata offset
//   [32,..) sample region, fixed stride: n_traces * samples_per_trace * f32
//   [meta..) per trace: u32 length + UTF-8 key=value record
//
// A file is written once (create / append / seal) and immutable afterwards;
// any number of readers may stream a sealed file concurrently.

#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scakit/errors.hpp"

namespace scakit {

namespace detail {

inline void put_le(std::string &out, std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i)
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint64_t get_le(const unsigned char *p, int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i)
        v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

static_assert(std::endian::native == std::endian::little,
              "sample region fast path assumes a little-endian host");

} // namespace detail

/// Uniform streaming view over a set of traces (file-backed or in-memory).
class TraceSource {
  public:
    virtual ~TraceSource() = default;

    virtual std::size_t size() const = 0;
    virtual std::size_t trace_length() const = 0;

    /// Copies samples [s0, s1) of traces [first, first+count) into `out`,
    /// row-major with stride (s1 - s0).
    virtual void read(std::size_t first, std::size_t count, std::size_t s0, std::size_t s1,
                      float *out) const = 0;

    virtual std::string_view meta(std::size_t i) const = 0;

    void check_window(std::size_t s0, std::size_t s1) const {
        if (s0 >= s1 || s1 > trace_length())
            throw UsageError("sample window out of range");
    }
};

/// In-memory trace set; used by profiling campaigns and tests.
class MemTraceSet final : public TraceSource {
  public:
    MemTraceSet() = default;
    explicit MemTraceSet(std::size_t trace_length) : len_(trace_length) {}

    void append(std::span<const float> samples, std::string meta_record) {
        if (len_ == 0)
            len_ = samples.size();
        if (samples.size() != len_)
            throw UsageError("trace length mismatch on append");
        data_.insert(data_.end(), samples.begin(), samples.end());
        metas_.push_back(std::move(meta_record));
    }

    std::size_t size() const override { return metas_.size(); }
    std::size_t trace_length() const override { return len_; }

    void read(std::size_t first, std::size_t count, std::size_t s0, std::size_t s1,
              float *out) const override {
        check_window(s0, s1);
        const std::size_t w = s1 - s0;
        for (std::size_t t = 0; t < count; ++t)
            std::memcpy(out + t * w, data_.data() + (first + t) * len_ + s0, w * sizeof(float));
    }

    std::string_view meta(std::size_t i) const override { return metas_[i]; }

    std::span<const float> trace(std::size_t i) const {
        return {data_.data() + i * len_, len_};
    }

  private:
    std::size_t len_ = 0;
    std::vector<float> data_;
    std::vector<std::string> metas_;
};

/// A subsequence view (ascending trace indices) over another source; the
/// chosen-input attack filters trace sets this way.
class FilteredSource final : public TraceSource {
  public:
    FilteredSource(const TraceSource &base, std::vector<std::size_t> indices)
        : base_(base), idx_(std::move(indices)) {}

    std::size_t size() const override { return idx_.size(); }
    std::size_t trace_length() const override { return base_.trace_length(); }

    void read(std::size_t first, std::size_t count, std::size_t s0, std::size_t s1,
              float *out) const override {
        check_window(s0, s1);
        const std::size_t w = s1 - s0;
        for (std::size_t t = 0; t < count; ++t)
            base_.read(idx_[first + t], 1, s0, s1, out + t * w);
    }

    std::string_view meta(std::size_t i) const override { return base_.meta(idx_[i]); }

  private:
    const TraceSource &base_;
    std::vector<std::size_t> idx_;
};

class TraceStoreWriter {
  public:
    static constexpr std::uint16_t kVersion = 1;

    /// Creates a new store; refuses to overwrite an existing file.
    TraceStoreWriter(const std::string &path, std::uint32_t samples_per_trace)
        : path_(path), spt_(samples_per_trace) {
        if (std::filesystem::exists(path))
            throw UsageError("trace store already exists: " + path);
        out_.open(path, std::ios::binary);
        if (!out_)
            throw Error("cannot create trace store: " + path);
        std::string header(32, '\0');
        out_.write(header.data(), static_cast<std::streamsize>(header.size()));
    }

    void append(std::span<const float> samples, std::string meta_record) {
        if (sealed_)
            throw UsageError("append after seal");
        if (samples.size() != spt_)
            throw UsageError("trace length mismatch on append");
        out_.write(reinterpret_cast<const char *>(samples.data()),
                   static_cast<std::streamsize>(samples.size() * sizeof(float)));
        metas_.push_back(std::move(meta_record));
        ++n_;
    }

    /// Writes the metadata block and the final header; the file is immutable
    /// afterwards.
    void seal() {
        if (sealed_)
            return;
        const std::uint64_t meta_offset = 32 + n_ * static_cast<std::uint64_t>(spt_) * 4;
        for (const auto &m : metas_) {
            std::string rec;
            detail::put_le(rec, m.size(), 4);
            out_.write(rec.data(), 4);
            out_.write(m.data(), static_cast<std::streamsize>(m.size()));
        }
        std::string header;
        header += "BCTR";
        detail::put_le(header, kVersion, 2);
        detail::put_le(header, 0, 1); // f32
        detail::put_le(header, 0, 1);
        detail::put_le(header, n_, 8);
        detail::put_le(header, spt_, 4);
        detail::put_le(header, 0, 4);
        detail::put_le(header, meta_offset, 8);
        out_.seekp(0);
        out_.write(header.data(), static_cast<std::streamsize>(header.size()));
        out_.close();
        if (!out_)
            throw Error("failed to seal trace store: " + path_);
        sealed_ = true;
    }

  private:
    std::string path_;
    std::ofstream out_;
    std::uint32_t spt_;
    std::uint64_t n_ = 0;
    std::vector<std::string> metas_;
    bool sealed_ = false;
};

/// Read-only handle on a sealed store. Metadata is loaded eagerly (it is
/// small next to the sample region); samples stream on demand.
class TraceStore final : public TraceSource {
  public:
    explicit TraceStore(const std::string &path) : path_(path) {
        in_.open(path, std::ios::binary);
        if (!in_)
            throw Error("cannot open trace store: " + path);
        unsigned char header[32];
        in_.read(reinterpret_cast<char *>(header), 32);
        if (in_.gcount() != 32 || std::memcmp(header, "BCTR", 4) != 0)
            throw FormatError("not a trace store (bad magic): " + path);
        const auto version = static_cast<std::uint16_t>(detail::get_le(header + 4, 2));
        if (version != TraceStoreWriter::kVersion)
            throw FormatError("unsupported trace store version " + std::to_string(version));
        if (header[6] != 0)
            throw FormatError("unsupported sample dtype");
        n_ = detail::get_le(header + 8, 8);
        spt_ = static_cast<std::uint32_t>(detail::get_le(header + 16, 4));
        meta_offset_ = detail::get_le(header + 24, 8);

        const std::uint64_t expected_meta = 32 + n_ * static_cast<std::uint64_t>(spt_) * 4;
        const auto file_size = static_cast<std::uint64_t>(std::filesystem::file_size(path));
        if (meta_offset_ != expected_meta || file_size < meta_offset_)
            throw IntegrityError("trace store is truncated or inconsistent: " + path);

        // Metadata block.
        in_.seekg(static_cast<std::streamoff>(meta_offset_));
        metas_.reserve(n_);
        for (std::uint64_t i = 0; i < n_; ++i) {
            unsigned char lenbuf[4];
            in_.read(reinterpret_cast<char *>(lenbuf), 4);
            if (in_.gcount() != 4)
                throw IntegrityError("metadata block truncated: " + path);
            const auto len = static_cast<std::uint32_t>(detail::get_le(lenbuf, 4));
            std::string m(len, '\0');
            in_.read(m.data(), len);
            if (in_.gcount() != static_cast<std::streamsize>(len))
                throw IntegrityError("metadata block truncated: " + path);
            metas_.push_back(std::move(m));
        }
        in_.clear();
    }

    std::size_t size() const override { return n_; }
    std::size_t trace_length() const override { return spt_; }
    const std::string &path() const { return path_; }

    void read(std::size_t first, std::size_t count, std::size_t s0, std::size_t s1,
              float *out) const override {
        check_window(s0, s1);
        if (first + count > n_)
            throw UsageError("trace range out of bounds");
        const std::size_t w = s1 - s0;
        auto &in = in_;
        if (s0 == 0 && s1 == spt_) {
            in.seekg(static_cast<std::streamoff>(32 + (first * spt_) * 4));
            in.read(reinterpret_cast<char *>(out),
                    static_cast<std::streamsize>(count * spt_ * sizeof(float)));
            if (in.gcount() != static_cast<std::streamsize>(count * spt_ * sizeof(float)))
                throw IntegrityError("sample region truncated: " + path_);
            return;
        }
        for (std::size_t t = 0; t < count; ++t) {
            in.seekg(static_cast<std::streamoff>(32 + ((first + t) * spt_ + s0) * 4));
            in.read(reinterpret_cast<char *>(out + t * w),
                    static_cast<std::streamsize>(w * sizeof(float)));
            if (in.gcount() != static_cast<std::streamsize>(w * sizeof(float)))
                throw IntegrityError("sample region truncated: " + path_);
        }
    }

    std::string_view meta(std::size_t i) const override { return metas_[i]; }

  private:
    std::string path_;
    mutable std::ifstream in_;
    std::uint64_t n_ = 0;
    std::uint32_t spt_ = 0;
    std::uint64_t meta_offset_ = 0;
    std::vector<std::string> metas_;
};

/// Append-side counterpart of TraceSource: campaigns and preprocessing
/// passes write through this, to a store or an in-memory set.
struct TraceSink {
    virtual ~TraceSink() = default;
    virtual void append(std::span<const float> samples, std::string meta) = 0;
};

struct StoreSink final : TraceSink {
    explicit StoreSink(TraceStoreWriter &w) : writer(w) {}
    void append(std::span<const float> samples, std::string meta) override {
        writer.append(samples, std::move(meta));
    }
    TraceStoreWriter &writer;
};

struct MemSink final : TraceSink {
    explicit MemSink(MemTraceSet &s) : set(s) {}
    void append(std::span<const float> samples, std::string meta) override {
        set.append(samples, std::move(meta));
    }
    MemTraceSet &set;
};

/// Streams the source as non-overlapping ordered batches; the last batch may
/// be short. fn(first_trace, count, samples) sees the full trace width.
inline void iterate_chunks(const TraceSource &src, std::size_t chunk_size,
                           const std::function<void(std::size_t, std::size_t, const float *)> &fn) {
    if (chunk_size == 0)
        throw UsageError("chunk size must be positive");
    const std::size_t n = src.size();
    const std::size_t w = src.trace_length();
    std::vector<float> buf(std::min(chunk_size, n ? n : 1) * w);
    for (std::size_t first = 0; first < n; first += chunk_size) {
        const std::size_t count = std::min(chunk_size, n - first);
        src.read(first, count, 0, w, buf.data());
        fn(first, count, buf.data());
    }
}

/// Per-trace sub-vectors of a sample window, preserving trace order.
inline std::vector<float> column_window(const TraceSource &src, std::size_t s0, std::size_t s1) {
    src.check_window(s0, s1);
    std::vector<float> out(src.size() * (s1 - s0));
    if (src.size() > 0)
        src.read(0, src.size(), s0, s1, out.data());
    return out;
}

// --- CSV interchange (one trace per row) ---

inline void csv_to_store(const std::string &csv_path, const std::string &store_path) {
    std::ifstream in(csv_path);
    if (!in)
        throw Error("cannot open CSV file: " + csv_path);
    std::vector<std::vector<float>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::vector<float> row;
        const char *p = line.c_str();
        char *end = nullptr;
        while (*p) {
            const float v = std::strtof(p, &end);
            if (end == p)
                throw FormatError("bad CSV sample value in " + csv_path);
            row.push_back(v);
            p = end;
            while (*p == ',' || *p == ' ' || *p == '\t' || *p == '\r')
                ++p;
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw FormatError("ragged CSV rows in " + csv_path);
        rows.push_back(std::move(row));
    }
    if (rows.empty())
        throw FormatError("CSV file has no traces: " + csv_path);
    TraceStoreWriter w(store_path, static_cast<std::uint32_t>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        w.append(rows[i], "id=" + std::to_string(i));
    w.seal();
}

inline void store_to_csv(const TraceSource &src, const std::string &csv_path) {
    std::ofstream out(csv_path);
    if (!out)
        throw Error("cannot create CSV file: " + csv_path);
    const std::size_t w = src.trace_length();
    std::vector<float> buf(w);
    char num[64];
    for (std::size_t i = 0; i < src.size(); ++i) {
        src.read(i, 1, 0, w, buf.data());
        std::string line;
        for (std::size_t s = 0; s < w; ++s) {
            std::snprintf(num, sizeof(num), "%.9g", static_cast<double>(buf[s]));
            if (s)
                line += ',';
            line += num;
        }
        line += '\n';
        out << line;
    }
}

} // namespace scakit
