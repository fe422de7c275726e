// Copyright 2026 The ccnn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ccnn/image_io.hpp"
#include "ccnn/scene.hpp"

namespace ccnn {

struct Dataset {
    SceneSpec spec;
    bool spec_loaded = true;  // false when read from a bare image directory
    std::vector<SceneSample> samples;
};

/// Balanced generation: sample i gets class i mod num_classes and the
/// derived seed spec.seed + i, so any sample is reproducible in isolation.
inline Dataset generate_dataset(const SceneSpec& spec, int count) {
    spec.validate();
    if (count < 1) throw ContractError("generate_dataset: count must be >= 1");
    Dataset d;
    d.spec = spec;
    d.samples.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i)
        d.samples.push_back(
            generate_scene(spec, i % spec.num_classes, spec.seed + static_cast<uint64_t>(i)));
    return d;
}

namespace detail {

inline std::string image_filename(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "img_%05d.pgm", index);
    return buf;
}

inline std::string format_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

/// Splits one CSV line (no quoting; the formats here never need it).
inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= line.size()) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) comma = line.size();
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

/// Iterates CSV records with their byte offsets; skips blank lines.
template <typename Fn>
void for_each_csv_line(const std::string& text, const std::string& origin, Fn&& fn) {
    std::size_t line_start = 0;
    while (line_start < text.size()) {
        std::size_t nl = text.find('\n', line_start);
        if (nl == std::string::npos) nl = text.size();
        std::string line = text.substr(line_start, nl - line_start);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) fn(line, line_start);
        line_start = nl + 1;
    }
    (void)origin;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

inline double parse_csv_double(const std::string& field, const std::string& origin,
                               std::size_t offset) {
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    if (end == field.c_str() || *end != '\0')
        throw ParseError(origin + ": '" + field + "' is not a number", offset);
    return v;
}

inline long parse_csv_long(const std::string& field, const std::string& origin,
                           std::size_t offset) {
    char* end = nullptr;
    const long v = std::strtol(field.c_str(), &end, 10);
    if (end == field.c_str() || *end != '\0')
        throw ParseError(origin + ": '" + field + "' is not an integer", offset);
    return v;
}

}  // namespace detail

/// Writes images/*.pgm plus manifest.csv (filename,class_id), boxes.csv
/// (filename,x0,y0,x1,y1: one line per ground-truth box) and spec.txt.
/// All text is ASCII with LF line endings.
inline void write_dataset(const Dataset& d, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "images");

    std::ofstream manifest(fs::path(dir) / "manifest.csv", std::ios::trunc);
    std::ofstream boxes(fs::path(dir) / "boxes.csv", std::ios::trunc);
    if (!manifest || !boxes) throw IoError("cannot create dataset files in '" + dir + "'");
    for (std::size_t i = 0; i < d.samples.size(); ++i) {
        const SceneSample& s = d.samples[i];
        const std::string name = detail::image_filename(static_cast<int>(i));
        write_pnm((fs::path(dir) / "images" / name).string(), s.image);
        manifest << name << "," << s.class_id << "\n";
        for (const Box& b : s.gt_boxes)
            boxes << name << "," << detail::format_g(b.x0) << "," << detail::format_g(b.y0) << ","
                  << detail::format_g(b.x1) << "," << detail::format_g(b.y1) << "\n";
    }
    if (!manifest || !boxes) throw IoError("write failed in '" + dir + "'");
    manifest.close();
    boxes.close();
    d.spec.to_config().save((fs::path(dir) / "spec.txt").string());
}

inline Dataset read_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    Dataset d;

    const fs::path spec_path = fs::path(dir) / "spec.txt";
    if (fs::exists(spec_path)) {
        d.spec = SceneSpec::from_config(KvConfig::load(spec_path.string()));
        d.spec_loaded = true;
    } else {
        d.spec_loaded = false;
    }

    const std::string manifest_origin = (fs::path(dir) / "manifest.csv").string();
    const std::string manifest_text = detail::read_text_file(manifest_origin);
    std::map<std::string, std::size_t> index_by_name;
    detail::for_each_csv_line(manifest_text, manifest_origin,
                              [&](const std::string& line, std::size_t off) {
        const auto fields = detail::split_csv(line);
        if (fields.size() != 2)
            throw ParseError(manifest_origin + ": expected filename,class_id", off);
        const fs::path img_path = fs::path(dir) / "images" / fields[0];
        if (!fs::exists(img_path))
            throw ParseError(manifest_origin + ": references missing file '" + fields[0] + "'",
                             off);
        SceneSample s;
        s.image = read_pnm(img_path.string());
        s.class_id = static_cast<int>(detail::parse_csv_long(fields[1], manifest_origin, off));
        index_by_name[fields[0]] = d.samples.size();
        d.samples.push_back(std::move(s));
    });

    const fs::path boxes_path = fs::path(dir) / "boxes.csv";
    if (fs::exists(boxes_path)) {
        const std::string boxes_origin = boxes_path.string();
        const std::string boxes_text = detail::read_text_file(boxes_origin);
        detail::for_each_csv_line(boxes_text, boxes_origin,
                                  [&](const std::string& line, std::size_t off) {
            const auto fields = detail::split_csv(line);
            if (fields.size() != 5)
                throw ParseError(boxes_origin + ": expected filename,x0,y0,x1,y1", off);
            const auto it = index_by_name.find(fields[0]);
            if (it == index_by_name.end())
                throw ParseError(boxes_origin + ": box for unknown file '" + fields[0] + "'", off);
            Box b;
            b.x0 = detail::parse_csv_double(fields[1], boxes_origin, off);
            b.y0 = detail::parse_csv_double(fields[2], boxes_origin, off);
            b.x1 = detail::parse_csv_double(fields[3], boxes_origin, off);
            b.y1 = detail::parse_csv_double(fields[4], boxes_origin, off);
            d.samples[it->second].gt_boxes.push_back(b);
        });
    }

    if (!d.spec_loaded) {
        // Bare image directory: recover what the consumers need.
        if (!d.samples.empty()) d.spec.image_size = d.samples[0].image.dim(1);
        int max_class = 1;
        for (const auto& s : d.samples) max_class = std::max(max_class, s.class_id);
        d.spec.num_classes = max_class + 1;
    }
    return d;
}

}  // namespace ccnn
