// Copyright 2026 The wmaudit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "wmaudit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "wmaudit/error.hpp"

namespace wmaudit {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::string_view task_name(Task task) {
  return task == Task::kClassification ? "classification" : "generation";
}

Task parse_task(std::string_view name) {
  if (name == "classification") return Task::kClassification;
  if (name == "generation") return Task::kGeneration;
  throw Error(ErrorCode::kInvalidArgument, "unknown task '" + std::string(name) + "'");
}

DatasetFormat parse_dataset_format(std::string_view name) {
  if (name == "imagefolder") return DatasetFormat::kImageFolder;
  if (name == "jsonl") return DatasetFormat::kJsonl;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown dataset format '" + std::string(name) + "'");
}

void DatasetManifest::validate() const {
  std::set<std::string_view> seen;
  for (const Record& r : records) {
    if (!seen.insert(r.id).second) {
      throw Error(ErrorCode::kDuplicateId, "duplicate record id '" + r.id + "'");
    }
    if (task == Task::kClassification) {
      if (!r.label) {
        throw Error(ErrorCode::kMissingField, "record '" + r.id + "' has no label");
      }
      if (!class_count || *r.label < 0 || *r.label >= *class_count) {
        throw Error(ErrorCode::kLabelOutOfRange,
                    "record '" + r.id + "' label " + std::to_string(*r.label) +
                        " outside [0, " + std::to_string(class_count.value_or(0)) + ")");
      }
    } else if (!r.caption || r.caption->empty()) {
      throw Error(ErrorCode::kMissingField, "record '" + r.id + "' has no caption");
    }
  }
}

std::optional<std::size_t> DatasetManifest::find(std::string_view id) const {
  auto it = std::lower_bound(records.begin(), records.end(), id,
                             [](const Record& r, std::string_view v) { return r.id < v; });
  if (it != records.end() && it->id == id) {
    return static_cast<std::size_t>(it - records.begin());
  }
  // Manifests built by hand may not be sorted yet.
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].id == id) return i;
  }
  return std::nullopt;
}

namespace {

void sort_records(DatasetManifest& m) {
  std::sort(m.records.begin(), m.records.end(),
            [](const Record& a, const Record& b) { return a.id < b.id; });
}

void check_images_exist(const DatasetManifest& m, const fs::path& root) {
  for (const Record& r : m.records) {
    if (!fs::exists(root / r.image)) {
      throw Error(ErrorCode::kMissingFile,
                  "image for record '" + r.id + "' not found: " + (root / r.image).string());
    }
  }
}

DatasetManifest load_imagefolder(const fs::path& root) {
  DatasetManifest m;
  m.task = Task::kClassification;
  std::vector<std::string> classes;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) classes.push_back(entry.path().filename().string());
  }
  std::sort(classes.begin(), classes.end());
  if (classes.empty()) {
    throw Error(ErrorCode::kMissingFile, "no class directories under " + root.string());
  }
  for (std::size_t label = 0; label < classes.size(); ++label) {
    for (const auto& entry : fs::directory_iterator(root / classes[label])) {
      if (!entry.is_regular_file() || entry.path().extension() != ".png") continue;
      Record r;
      r.id = classes[label] + "/" + entry.path().stem().string();
      r.image = fs::path(classes[label]) / entry.path().filename();
      r.label = static_cast<int>(label);
      m.records.push_back(std::move(r));
    }
  }
  m.class_count = static_cast<int>(classes.size());
  m.class_names = std::move(classes);
  sort_records(m);
  m.validate();
  return m;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingFile, path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

DatasetManifest parse_manifest(std::string_view text, const LoadOptions& options) {
  DatasetManifest m;
  std::optional<Task> meta_task;
  std::optional<int> meta_classes;
  std::vector<Record> records;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParse,
                  "manifest line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!j.is_object()) {
      throw Error(ErrorCode::kParse, "manifest line " + std::to_string(lineno) +
                                         " is not an object");
    }
    if (j.contains("meta")) {
      const auto& meta = j["meta"];
      if (meta.contains("task")) meta_task = parse_task(meta["task"].get<std::string>());
      if (meta.contains("class_count") && !meta["class_count"].is_null()) {
        meta_classes = meta["class_count"].get<int>();
      }
      if (meta.contains("class_names")) {
        m.class_names = meta["class_names"].get<std::vector<std::string>>();
      }
      continue;
    }
    Record r;
    try {
      if (!j.contains("id")) {
        throw Error(ErrorCode::kMissingField,
                    "manifest line " + std::to_string(lineno) + " lacks \"id\"");
      }
      if (!j.contains("image")) {
        throw Error(ErrorCode::kMissingField,
                    "manifest line " + std::to_string(lineno) + " lacks \"image\"");
      }
      r.id = j["id"].get<std::string>();
      r.image = j["image"].get<std::string>();
      if (j.contains("label") && !j["label"].is_null()) r.label = j["label"].get<int>();
      if (j.contains("caption") && !j["caption"].is_null()) {
        r.caption = j["caption"].get<std::string>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParse,
                  "manifest line " + std::to_string(lineno) + ": " + e.what());
    }
    records.push_back(std::move(r));
  }
  m.task = options.task.value_or(meta_task.value_or(Task::kGeneration));
  m.records = std::move(records);
  if (m.task == Task::kClassification) {
    m.class_count = options.class_count ? options.class_count : meta_classes;
    if (!m.class_count) {
      int max_label = -1;
      for (const Record& r : m.records) max_label = std::max(max_label, r.label.value_or(-1));
      m.class_count = max_label + 1;
    }
  }
  sort_records(m);
  m.validate();
  return m;
}

DatasetManifest load_dataset(const fs::path& root, DatasetFormat format,
                             const LoadOptions& options) {
  if (!fs::exists(root)) throw Error(ErrorCode::kMissingFile, root.string());
  DatasetManifest m;
  if (format == DatasetFormat::kImageFolder) {
    m = load_imagefolder(root);
  } else {
    m = parse_manifest(read_text(root / kManifestFile), options);
  }
  if (options.check_images) check_images_exist(m, root);
  return m;
}

std::string serialize_manifest(const DatasetManifest& manifest) {
  std::string out;
  ordered_json meta;
  meta["task"] = task_name(manifest.task);
  meta["class_count"] =
      manifest.class_count ? ordered_json(*manifest.class_count) : ordered_json(nullptr);
  if (!manifest.class_names.empty()) meta["class_names"] = manifest.class_names;
  out += ordered_json{{"meta", meta}}.dump() + "\n";
  for (const Record& r : manifest.records) {
    ordered_json j;
    j["id"] = r.id;
    j["image"] = r.image.generic_string();
    if (r.label) j["label"] = *r.label;
    if (r.caption) j["caption"] = *r.caption;
    out += j.dump() + "\n";
  }
  return out;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << serialize_manifest(manifest);
}

Dataset load_images(const DatasetManifest& manifest, const fs::path& root) {
  Dataset d;
  d.manifest = manifest;
  d.images.reserve(manifest.records.size());
  for (const Record& r : manifest.records) d.images.push_back(read_png(root / r.image));
  return d;
}

void save_dataset(const Dataset& dataset, const fs::path& root) {
  for (std::size_t i = 0; i < dataset.manifest.records.size(); ++i) {
    write_png(dataset.images[i], root / dataset.manifest.records[i].image);
  }
  save_manifest(dataset.manifest, root / kManifestFile);
}

std::vector<std::string> select_watermark_subset(const DatasetManifest& manifest,
                                                 double wr, Key key) {
  if (!(wr > 0.0 && wr <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "watermark rate must be in (0, 1], got " + std::to_string(wr));
  }
  const std::size_t n = manifest.records.size();
  // std::round rounds half away from zero.
  const auto count = static_cast<std::size_t>(std::round(wr * static_cast<double>(n)));
  if (count == 0) {
    throw Error(ErrorCode::kEmptySubset,
                "wr=" + std::to_string(wr) + " selects no records out of " +
                    std::to_string(n) + "; raise wr to at least " +
                    std::to_string(0.5 / static_cast<double>(std::max<std::size_t>(n, 1))));
  }
  const std::vector<std::size_t> perm = keyed_permutation(n, key);
  std::vector<std::string> ids;
  ids.reserve(count);
  for (std::size_t i = 0; i < count; ++i) ids.push_back(manifest.records[perm[i]].id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

Split split_records(std::size_t n, double test_fraction, Key key) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "test fraction must be in [0, 1)");
  }
  const std::vector<std::size_t> perm = keyed_permutation(n, key);
  const auto n_test = static_cast<std::size_t>(std::round(test_fraction * static_cast<double>(n)));
  Split s;
  s.test.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
  s.train.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_test), perm.end());
  std::sort(s.test.begin(), s.test.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

Dataset subset_dataset(const Dataset& dataset, const std::vector<std::size_t>& indices) {
  Dataset out;
  out.manifest.task = dataset.manifest.task;
  out.manifest.class_count = dataset.manifest.class_count;
  out.manifest.class_names = dataset.manifest.class_names;
  for (std::size_t i : indices) {
    out.manifest.records.push_back(dataset.manifest.records.at(i));
    out.images.push_back(dataset.images.at(i));
  }
  return out;
}

}  // namespace wmaudit
