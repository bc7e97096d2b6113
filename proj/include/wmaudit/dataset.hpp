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

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wmaudit/image.hpp"
#include "wmaudit/rng.hpp"

namespace wmaudit {

enum class Task { kClassification, kGeneration };

std::string_view task_name(Task task);
Task parse_task(std::string_view name);

enum class DatasetFormat { kImageFolder, kJsonl };

DatasetFormat parse_dataset_format(std::string_view name);

struct Record {
  std::string id;
  /// Relative to the manifest root.
  std::filesystem::path image;
  std::optional<int> label;
  std::optional<std::string> caption;

  friend bool operator==(const Record&, const Record&) = default;
};

struct DatasetManifest {
  Task task = Task::kGeneration;
  std::optional<int> class_count;
  /// ImageFolder class directory names, index = label. Empty for GenFolder.
  std::vector<std::string> class_names;
  /// Sorted by id.
  std::vector<Record> records;

  /// Throws kDuplicateId / kLabelOutOfRange / kMissingField.
  void validate() const;
  /// Index of the record with this id, or nullopt.
  std::optional<std::size_t> find(std::string_view id) const;
  std::size_t size() const { return records.size(); }

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

/// Manifest plus decoded pixels, images[i] belonging to records[i].
struct Dataset {
  DatasetManifest manifest;
  std::vector<Image> images;
};

struct LoadOptions {
  /// For jsonl: overrides the task stored in the manifest meta line
  /// (default generation when neither is present).
  std::optional<Task> task;
  std::optional<int> class_count;
  /// Check that every referenced image exists.
  bool check_images = true;
};

inline constexpr std::string_view kManifestFile = "manifest.jsonl";
inline constexpr std::string_view kAnnotationsFile = "annotations.jsonl";

/// ImageFolder: root/<class_name>/<stem>.png, record id "<class_name>/<stem>".
/// GenFolder: root/manifest.jsonl with {"id","image","caption"} lines.
DatasetManifest load_dataset(const std::filesystem::path& root, DatasetFormat format,
                             const LoadOptions& options = {});

/// JSON Lines with a leading {"meta":...} line and fixed record field order.
std::string serialize_manifest(const DatasetManifest& manifest);
DatasetManifest parse_manifest(std::string_view text, const LoadOptions& options = {});
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

Dataset load_images(const DatasetManifest& manifest, const std::filesystem::path& root);
/// Writes every image at root/record.image and root/manifest.jsonl.
void save_dataset(const Dataset& dataset, const std::filesystem::path& root);

/// Keyed sample of round(wr * N) record ids (round half away from zero),
/// returned sorted. Throws kInvalidArgument for wr outside (0, 1] and
/// kEmptySubset when the rounded count is zero.
std::vector<std::string> select_watermark_subset(const DatasetManifest& manifest,
                                                 double wr, Key key);

/// Deterministic train/test split of record indices; test gets
/// round(fraction * N) records.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};
Split split_records(std::size_t n, double test_fraction, Key key);

/// Sub-dataset holding the given record indices, in the given order.
Dataset subset_dataset(const Dataset& dataset, const std::vector<std::size_t>& indices);

}  // namespace wmaudit
