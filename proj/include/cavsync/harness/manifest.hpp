// Copyright 2026 The cavsync Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CAVSYNC_HARNESS_MANIFEST_HPP_
#define CAVSYNC_HARNESS_MANIFEST_HPP_

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cavsync/alignment.hpp"
#include "cavsync/errors.hpp"
#include "cavsync/harness/synthetic.hpp"
#include "cavsync/numerics/cavt.hpp"

namespace cavsync {

/// One ingested clip with its optional labels.
struct ClipRecord {
  AlignedPair pair;
  std::vector<std::size_t> labels;
  std::vector<std::size_t> frame_labels;  // empty when the manifest has none
};

/// Writes every clip as CAVT files under `dir` plus `dir/manifest.jsonl`.
/// Paths inside the manifest are relative to `dir`.
inline std::filesystem::path write_dataset(const std::filesystem::path& dir,
                                           const std::vector<ClipRecord>& clips) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "clips");
  const fs::path manifest = dir / "manifest.jsonl";
  std::ofstream out(manifest, std::ios::trunc);
  if (!out) throw LoadError("cannot open " + manifest.string() + " for writing");
  for (const auto& clip : clips) {
    const std::string& id = clip.pair.id;
    nlohmann::json line;
    line["id"] = id;
    std::vector<std::string> frames;
    for (std::size_t t = 0; t < clip.pair.frames.size(); ++t) {
      const std::string rel = "clips/" + id + "_f" + std::to_string(t) + ".cavt";
      write_cavt(dir / rel, clip.pair.frames[t]);
      frames.push_back(rel);
    }
    const std::string spec = "clips/" + id + "_spec.cavt";
    write_cavt(dir / spec, clip.pair.spectrogram);
    line["frames"] = frames;
    line["spectrogram"] = spec;
    line["labels"] = clip.labels;
    if (!clip.frame_labels.empty()) line["frame_labels"] = clip.frame_labels;
    out << line.dump() << '\n';
  }
  if (!out) throw LoadError("failed writing " + manifest.string());
  return manifest;
}

inline std::vector<ClipRecord> clip_records(const SyntheticDataset& ds) {
  std::vector<ClipRecord> out;
  out.reserve(ds.videos.size());
  for (const auto& v : ds.videos) out.push_back({v.pair, v.labels, v.frame_classes});
  return out;
}

/// Reads a JSON-lines manifest and validates every referenced clip.
inline std::vector<ClipRecord> ingest_manifest(const std::filesystem::path& path,
                                               std::size_t window_length, std::size_t patch) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open manifest " + path.string());
  const std::filesystem::path root = path.parent_path();
  std::vector<ClipRecord> out;
  std::string text;
  std::size_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json line;
    try {
      line = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw LoadError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    const std::string id = line.value("id", "line " + std::to_string(line_no));
    try {
      std::vector<FloatArray> frames;
      for (const auto& f : line.at("frames")) frames.push_back(read_cavt(root / f.get<std::string>()));
      FloatArray spec = read_cavt(root / line.at("spectrogram").get<std::string>());
      ClipRecord rec;
      rec.labels = line.value("labels", std::vector<std::size_t>{});
      rec.frame_labels = line.value("frame_labels", std::vector<std::size_t>{});
      if (!rec.frame_labels.empty() && rec.frame_labels.size() != frames.size()) {
        throw ShapeError("frame_labels has " + std::to_string(rec.frame_labels.size()) +
                         " entries for " + std::to_string(frames.size()) + " frames");
      }
      rec.pair = make_aligned_pair(id, std::move(frames), std::move(spec), window_length, patch);
      out.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      throw LoadError("clip " + id + ": malformed manifest entry: " + e.what());
    } catch (const Error& e) {
      throw LoadError("clip " + id + ": " + e.what());
    }
  }
  return out;
}

}  // namespace cavsync

#endif  // CAVSYNC_HARNESS_MANIFEST_HPP_
