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

// Dataset sources.  Synthetic sets are generated from the run seed with a
// documented draw order (ground-truth map first, then one input per sample),
// so fixtures reproduce bit for bit and a smaller count is a prefix of a
// larger one.  File-backed sets load numeric CSV rows or IDX image/label
// pairs; dataset problems of any kind are configuration errors.

#ifndef RIEMANN_CLI_DATASET_HPP
#define RIEMANN_CLI_DATASET_HPP

#include <cstdint>
#include <filesystem>
#include <vector>

#include "riemann/cli/config.hpp"
#include "riemann/optimizer.hpp"
#include "riemann/rng.hpp"

namespace riemann::cli {

enum class DatasetKind {
  kSyntheticRegression,
  kSyntheticClassification,
  kCsvFile,
  kIdxPair,
};

struct DatasetSource {
  DatasetKind kind = DatasetKind::kSyntheticRegression;
  /// Synthetic kinds: samples to generate (required positive).  File kinds:
  /// cap on rows loaded, 0 loads everything.
  int count = 0;
  int input_dim = 0;
  int output_dim = 0;
  /// Multiplies synthetic inputs; file kinds ignore it.
  double input_scale = 1.0;
  std::filesystem::path csv_path;
  std::filesystem::path images_path;
  std::filesystem::path labels_path;
};

/// Reads the dataset.* keys.  Relative file paths resolve against the config
/// file's directory and must exist.  Throws ConfigInvalid on bad kinds,
/// non-positive dims, or missing files.
DatasetSource dataset_from_config(ConfigMap& config);

/// Materializes samples.  Synthetic kinds draw from rng:
///   regression      t = W* x, W* entries then inputs uniform in (-1, 1);
///   classification  one-hot argmax of W* x, output_dim >= 2.
/// CSV rows hold input_dim + output_dim numeric columns.  IDX pairs follow
/// the big-endian magic + dims container layout, pixels scaled by 1/255,
/// labels one-hot and in range.  Throws ConfigInvalid on malformed content.
std::vector<opt::Sample> load_dataset(const DatasetSource& source, SplitMix64& rng);

/// A raw IDX container: unsigned-byte payload with big-endian dimensions.
struct IdxData {
  std::vector<int> dims;
  std::vector<std::uint8_t> payload;
};

/// Parses one IDX file.  Throws ConfigInvalid on a bad magic, a non-byte
/// element type, or a payload that does not match the declared dimensions.
IdxData read_idx(const std::filesystem::path& path);

}  // namespace riemann::cli

#endif  // RIEMANN_CLI_DATASET_HPP
