// Copyright 2026 The Riemann Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "riemann/cli/dataset.hpp"

#include <charconv>
#include <fstream>
#include <string>

#include "riemann/errors.hpp"
#include "riemann/linalg.hpp"

namespace riemann::cli {
namespace {

using linalg::DenseMatrix;
using linalg::Vector;
using opt::Sample;

DenseMatrix draw_ground_truth(const DatasetSource& source, SplitMix64& rng) {
  DenseMatrix map(source.output_dim, source.input_dim);
  for (int r = 0; r < source.output_dim; ++r)
    for (int c = 0; c < source.input_dim; ++c) map(r, c) = rng.uniform(-1.0, 1.0);
  return map;
}

Vector draw_input(const DatasetSource& source, SplitMix64& rng) {
  Vector x(source.input_dim);
  for (double& v : x) v = source.input_scale * rng.uniform(-1.0, 1.0);
  return x;
}

std::vector<Sample> synthesize(const DatasetSource& source, SplitMix64& rng) {
  const DenseMatrix truth = draw_ground_truth(source, rng);
  std::vector<Sample> samples;
  samples.reserve(source.count);
  for (int i = 0; i < source.count; ++i) {
    Sample sample;
    sample.input = draw_input(source, rng);
    const Vector response = linalg::matvec(truth, sample.input);
    if (source.kind == DatasetKind::kSyntheticRegression) {
      sample.target = response;
    } else {
      int label = 0;
      for (int c = 1; c < source.output_dim; ++c)
        if (response[c] > response[label]) label = c;
      sample.target.assign(source.output_dim, 0.0);
      sample.target[label] = 1.0;
    }
    samples.push_back(std::move(sample));
  }
  return samples;
}

std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigInvalid("cannot read dataset file " + path.string());
  std::vector<std::uint8_t> bytes;
  char chunk[65536];
  while (in.read(chunk, sizeof chunk) || in.gcount() > 0)
    bytes.insert(bytes.end(), chunk, chunk + in.gcount());
  if (in.bad()) throw IoFailure("error reading " + path.string());
  return bytes;
}

std::vector<Sample> load_csv(const DatasetSource& source) {
  std::ifstream in(source.csv_path);
  if (!in) throw ConfigInvalid("cannot read dataset file " + source.csv_path.string());
  const int columns = source.input_dim + source.output_dim;
  std::vector<Sample> samples;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    Sample sample;
    sample.input.reserve(source.input_dim);
    sample.target.reserve(source.output_dim);
    std::size_t start = 0;
    int column = 0;
    while (start <= line.size()) {
      std::size_t end = line.find(',', start);
      if (end == std::string::npos) end = line.size();
      double value = 0.0;
      const char* first = line.data() + start;
      const char* last = line.data() + end;
      const auto [ptr, ec] = std::from_chars(first, last, value);
      if (ec != std::errc() || ptr != last)
        throw ConfigInvalid(source.csv_path.string() + " line " +
                            std::to_string(line_no) + ": not a number");
      (column < source.input_dim ? sample.input : sample.target).push_back(value);
      ++column;
      start = end + 1;
    }
    if (column != columns)
      throw ConfigInvalid(source.csv_path.string() + " line " +
                          std::to_string(line_no) + ": expected " +
                          std::to_string(columns) + " columns, got " +
                          std::to_string(column));
    samples.push_back(std::move(sample));
    if (source.count > 0 && static_cast<int>(samples.size()) == source.count) break;
  }
  if (in.bad()) throw IoFailure("error reading " + source.csv_path.string());
  if (samples.empty())
    throw ConfigInvalid(source.csv_path.string() + ": no data rows");
  if (source.count > 0 && static_cast<int>(samples.size()) < source.count)
    throw ConfigInvalid(source.csv_path.string() + ": has " +
                        std::to_string(samples.size()) + " rows, config wants " +
                        std::to_string(source.count));
  return samples;
}

std::vector<Sample> load_idx_pair(const DatasetSource& source) {
  const IdxData images = read_idx(source.images_path);
  const IdxData labels = read_idx(source.labels_path);
  if (images.dims.size() != 3)
    throw ConfigInvalid(source.images_path.string() + ": expected 3 dimensions");
  if (labels.dims.size() != 1)
    throw ConfigInvalid(source.labels_path.string() + ": expected 1 dimension");
  if (images.dims[0] != labels.dims[0])
    throw ConfigInvalid("image and label counts differ: " +
                        std::to_string(images.dims[0]) + " vs " +
                        std::to_string(labels.dims[0]));
  const int pixels = images.dims[1] * images.dims[2];
  if (pixels != source.input_dim)
    throw ConfigInvalid(source.images_path.string() + ": images have " +
                        std::to_string(pixels) + " pixels, config wants input_dim " +
                        std::to_string(source.input_dim));
  int count = images.dims[0];
  if (source.count > 0) {
    if (source.count > count)
      throw ConfigInvalid(source.images_path.string() + ": has " +
                          std::to_string(count) + " images, config wants " +
                          std::to_string(source.count));
    count = source.count;
  }
  std::vector<Sample> samples;
  samples.reserve(count);
  for (int i = 0; i < count; ++i) {
    const int label = labels.payload[i];
    if (label >= source.output_dim)
      throw ConfigInvalid(source.labels_path.string() + ": label " +
                          std::to_string(label) + " out of range for output_dim " +
                          std::to_string(source.output_dim));
    Sample sample;
    sample.input.resize(pixels);
    for (int p = 0; p < pixels; ++p)
      sample.input[p] =
          images.payload[static_cast<std::size_t>(i) * pixels + p] / 255.0;
    sample.target.assign(source.output_dim, 0.0);
    sample.target[label] = 1.0;
    samples.push_back(std::move(sample));
  }
  return samples;
}

std::filesystem::path resolve_path(ConfigMap& config, const std::string& key) {
  std::filesystem::path path = config.get_string(key);
  if (path.is_relative()) path = config.source_dir() / path;
  if (!std::filesystem::exists(path))
    throw ConfigInvalid("config key " + key + ": no such file " + path.string());
  return path;
}

}  // namespace

DatasetSource dataset_from_config(ConfigMap& config) {
  DatasetSource source;
  const std::string kind = config.get_string("dataset.kind");
  source.input_dim = static_cast<int>(config.get_int("dataset.input_dim"));
  source.output_dim = static_cast<int>(config.get_int("dataset.output_dim"));
  if (source.input_dim <= 0 || source.output_dim <= 0)
    throw ConfigInvalid("dataset dims must be positive");
  if (kind == "synthetic_regression" || kind == "synthetic_classification") {
    source.kind = kind == "synthetic_regression"
                      ? DatasetKind::kSyntheticRegression
                      : DatasetKind::kSyntheticClassification;
    source.count = static_cast<int>(config.get_int("dataset.count"));
    if (source.count <= 0)
      throw ConfigInvalid("dataset.count must be positive for synthetic data");
    source.input_scale = config.get_double("dataset.input_scale", 1.0);
    if (source.input_scale <= 0.0)
      throw ConfigInvalid("dataset.input_scale must be positive");
    if (source.kind == DatasetKind::kSyntheticClassification && source.output_dim < 2)
      throw ConfigInvalid("synthetic_classification needs output_dim >= 2");
  } else if (kind == "csv") {
    source.kind = DatasetKind::kCsvFile;
    source.count = static_cast<int>(config.get_int("dataset.count", 0));
    source.csv_path = resolve_path(config, "dataset.path");
  } else if (kind == "idx") {
    source.kind = DatasetKind::kIdxPair;
    source.count = static_cast<int>(config.get_int("dataset.count", 0));
    source.images_path = resolve_path(config, "dataset.images");
    source.labels_path = resolve_path(config, "dataset.labels");
  } else {
    throw ConfigInvalid("dataset.kind: unknown kind '" + kind + "'");
  }
  if (source.count < 0) throw ConfigInvalid("dataset.count must be non-negative");
  return source;
}

std::vector<Sample> load_dataset(const DatasetSource& source, SplitMix64& rng) {
  switch (source.kind) {
    case DatasetKind::kSyntheticRegression:
    case DatasetKind::kSyntheticClassification:
      return synthesize(source, rng);
    case DatasetKind::kCsvFile:
      return load_csv(source);
    case DatasetKind::kIdxPair:
      return load_idx_pair(source);
  }
  throw ConfigInvalid("unhandled dataset kind");
}

IdxData read_idx(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_binary_file(path);
  if (bytes.size() < 4 || bytes[0] != 0 || bytes[1] != 0)
    throw ConfigInvalid(path.string() + ": not an IDX file");
  if (bytes[2] != 0x08)
    throw ConfigInvalid(path.string() + ": IDX element type must be unsigned byte");
  const int ndims = bytes[3];
  if (ndims < 1 || bytes.size() < 4 + 4 * static_cast<std::size_t>(ndims))
    throw ConfigInvalid(path.string() + ": truncated IDX header");
  IdxData data;
  std::size_t total = 1;
  for (int d = 0; d < ndims; ++d) {
    const std::size_t at = 4 + 4 * static_cast<std::size_t>(d);
    const std::uint32_t dim = (std::uint32_t(bytes[at]) << 24) |
                              (std::uint32_t(bytes[at + 1]) << 16) |
                              (std::uint32_t(bytes[at + 2]) << 8) |
                              std::uint32_t(bytes[at + 3]);
    data.dims.push_back(static_cast<int>(dim));
    total *= dim;
  }
  const std::size_t header = 4 + 4 * static_cast<std::size_t>(ndims);
  if (bytes.size() != header + total)
    throw ConfigInvalid(path.string() + ": payload size " +
                        std::to_string(bytes.size() - header) +
                        " does not match dimensions (" + std::to_string(total) + ")");
  data.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
  return data;
}

}  // namespace riemann::cli
