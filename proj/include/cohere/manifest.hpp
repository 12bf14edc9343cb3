#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cohere/error.hpp"
#include "cohere/field_io.hpp"
#include "cohere/records.hpp"

namespace cohere {

using Json = nlohmann::ordered_json;

inline constexpr const char* kManifestFormat = "cohere-manifest";
inline constexpr int kManifestVersion = 1;
inline constexpr const char* kManifestFile = "manifest.jsonl";

enum class LabelKind { digit, depth };

inline const char* to_string(LabelKind k) { return k == LabelKind::digit ? "digit" : "depth"; }

/// One generated image.
struct ManifestItem {
  std::uint64_t item_id = 0;
  std::string source_dataset;
  std::uint64_t source_index = 0;
  int label = 0;  // digit class or depth class, per the manifest's label kind
  double coherence_length = 0.0;
  std::optional<double> depth;
  std::uint64_t base_seed = 0;
  std::string file;  // relative to the manifest directory
  std::string sha256;
  std::optional<std::string> preview;
  std::optional<std::string> preview_sha256;
  double exposure_scale = 1.0;
  std::uint64_t realizations = 1;
  bool converged = true;
  double convergence_change = -1.0;

  Json to_json() const {
    Json j;
    j["record"] = "item";
    j["item_id"] = item_id;
    j["source"] = Json{{"dataset", source_dataset}, {"index", source_index}};
    j["label"] = label;
    j["coherence_length"] = coherence_length;
    if (depth) j["depth"] = *depth;
    j["base_seed"] = base_seed;
    j["file"] = file;
    j["sha256"] = sha256;
    if (preview) {
      j["preview"] = *preview;
      j["preview_sha256"] = *preview_sha256;
    }
    j["exposure_scale"] = exposure_scale;
    j["realizations"] = realizations;
    j["converged"] = converged;
    j["convergence_change"] = convergence_change;
    return j;
  }

  static ManifestItem from_json(const Json& j) {
    ManifestItem it;
    it.item_id = j.at("item_id").get<std::uint64_t>();
    it.source_dataset = j.at("source").at("dataset").get<std::string>();
    it.source_index = j.at("source").at("index").get<std::uint64_t>();
    it.label = j.at("label").get<int>();
    it.coherence_length = j.at("coherence_length").get<double>();
    if (j.contains("depth")) it.depth = j["depth"].get<double>();
    it.base_seed = j.at("base_seed").get<std::uint64_t>();
    it.file = j.at("file").get<std::string>();
    it.sha256 = j.at("sha256").get<std::string>();
    if (j.contains("preview")) {
      it.preview = j["preview"].get<std::string>();
      it.preview_sha256 = j.at("preview_sha256").get<std::string>();
    }
    it.exposure_scale = j.at("exposure_scale").get<double>();
    it.realizations = j.at("realizations").get<std::uint64_t>();
    it.converged = j.at("converged").get<bool>();
    it.convergence_change = j.at("convergence_change").get<double>();
    return it;
  }
};

/// A dataset manifest: one JSON header line, one line per item in item-id order, one footer line.
struct Manifest {
  Json header;
  std::vector<ManifestItem> items;
  bool complete = false;
  std::uint64_t resume_cursor = 0;

  LabelKind label_kind() const {
    const auto k = header.at("label_kind").get<std::string>();
    if (k == "digit") return LabelKind::digit;
    if (k == "depth") return LabelKind::depth;
    throw DataError("unknown label kind '" + k + "'");
  }
  double exposure_scale() const { return header.at("exposure_scale").get<double>(); }
};

inline std::string manifest_line(const Json& j) { return j.dump() + "\n"; }

inline Json footer_json(bool complete, std::uint64_t items, std::uint64_t cursor) {
  Json j;
  j["record"] = "footer";
  j["status"] = complete ? "complete" : "incomplete";
  j["items"] = items;
  j["resume_cursor"] = cursor;
  return j;
}

inline std::string encode_manifest(const Manifest& m) {
  std::string out = manifest_line(m.header);
  for (const auto& it : m.items) out += manifest_line(it.to_json());
  out += manifest_line(footer_json(m.complete, m.items.size(), m.complete ? m.items.size() : m.resume_cursor));
  return out;
}

/// Parses manifest text. A missing footer or a torn last line (interrupted writer) yields an
/// incomplete manifest whose cursor is the number of intact items.
inline Manifest parse_manifest(std::string_view text, const std::string& source = "manifest") {
  Manifest m;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool footer_seen = false;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    const bool torn = end == std::string_view::npos;
    if (torn) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    if (footer_seen) throw DataError(source + ":" + std::to_string(line_no) + ": record after footer");
    Json j;
    try {
      j = Json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      if (torn && !m.header.is_null()) break;
      throw DataError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
    try {
      const auto kind = j.at("record").get<std::string>();
      if (m.header.is_null()) {
        if (kind != "header") throw DataError("first record must be the header");
        if (j.at("format").get<std::string>() != kManifestFormat || j.at("version").get<int>() != kManifestVersion) {
          throw DataError("unsupported manifest format");
        }
        m.header = j;
      } else if (kind == "header") {
        throw DataError("duplicate header");
      } else if (kind == "item") {
        auto it = ManifestItem::from_json(j);
        if (it.item_id != m.items.size()) throw DataError("item ids must be consecutive from 0");
        m.items.push_back(std::move(it));
      } else if (kind == "footer") {
        footer_seen = true;
        m.complete = j.at("status").get<std::string>() == "complete";
        m.resume_cursor = j.at("resume_cursor").get<std::uint64_t>();
        if (j.at("items").get<std::uint64_t>() != m.items.size()) throw DataError("footer item count mismatch");
      } else {
        throw DataError("unknown record '" + kind + "'");
      }
    } catch (const DataError& e) {
      throw DataError(source + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const nlohmann::json::exception& e) {
      throw DataError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (m.header.is_null()) throw DataError(source + ": manifest has no header");
  if (!footer_seen) {
    m.complete = false;
    m.resume_cursor = m.items.size();
  }
  return m;
}

inline Manifest read_manifest(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  return parse_manifest(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), path.string());
}

/// Append-only manifest writer. Each record is flushed as soon as it is written, so an interrupted run
/// leaves a manifest that parse_manifest can resume from.
class ManifestWriter {
 public:
  ManifestWriter(const std::filesystem::path& path, const Manifest& prefix) : path_(path) {
    const std::string text = [&] {
      std::string t = manifest_line(prefix.header);
      for (const auto& it : prefix.items) t += manifest_line(it.to_json());
      return t;
    }();
    detail::write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    out_.open(path, std::ios::binary | std::ios::app);
    if (!out_) throw DataError("cannot append to " + path.string());
    items_ = prefix.items.size();
  }

  void append(const ManifestItem& item) {
    write(manifest_line(item.to_json()));
    ++items_;
  }

  void finish(bool complete, std::uint64_t cursor) { write(manifest_line(footer_json(complete, items_, cursor))); }

  std::uint64_t items() const noexcept { return items_; }

 private:
  void write(const std::string& line) {
    out_.write(line.data(), static_cast<std::streamsize>(line.size()));
    out_.flush();
    if (!out_) throw DataError("write failed for " + path_.string());
  }

  std::filesystem::path path_;
  std::ofstream out_;
  std::uint64_t items_ = 0;
};

struct VerifyReport {
  std::vector<std::string> problems;
  bool ok() const noexcept { return problems.empty(); }
};

/// Checks that every referenced file exists with the recorded hash, that no unreferenced files sit in
/// the record directories, that the label taxonomy is consistent, and that the footer marks completion.
inline VerifyReport verify_manifest(const std::filesystem::path& manifest_path) {
  VerifyReport report;
  Manifest m;
  try {
    m = read_manifest(manifest_path);
  } catch (const DataError& e) {
    report.problems.push_back(e.what());
    return report;
  }
  if (!m.complete) report.problems.push_back("manifest is incomplete (resume cursor " + std::to_string(m.resume_cursor) + ")");
  const auto root = manifest_path.parent_path();
  std::set<std::filesystem::path> referenced;
  const bool depth_kind = m.header.value("label_kind", "") == "depth";
  for (const auto& it : m.items) {
    const std::string id = "item " + std::to_string(it.item_id);
    if (depth_kind != it.depth.has_value()) report.problems.push_back(id + ": depth field does not match label kind");
    auto check = [&](const std::string& rel, const std::string& hash) {
      const auto p = root / rel;
      referenced.insert(std::filesystem::weakly_canonical(p));
      if (!std::filesystem::exists(p)) {
        report.problems.push_back(id + ": missing file " + rel);
      } else if (sha256_file(p) != hash) {
        report.problems.push_back(id + ": hash mismatch for " + rel);
      }
    };
    check(it.file, it.sha256);
    if (it.preview) check(*it.preview, *it.preview_sha256);
  }
  for (const char* dir : {"records", "previews"}) {
    const auto d = root / dir;
    if (!std::filesystem::is_directory(d)) continue;
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(d)) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& p : files) {
      if (!referenced.count(std::filesystem::weakly_canonical(p))) {
        report.problems.push_back("extra file " + std::filesystem::relative(p, root).string());
      }
    }
  }
  return report;
}

}  // namespace cohere
