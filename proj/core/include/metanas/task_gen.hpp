#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "metanas/batch.hpp"
#include "metanas/rng.hpp"
#include "metanas/tensor.hpp"

namespace metanas {

// Image corpus: per-class lists of same-shaped images with values in [0,1].
// Values are u8-quantized (multiples of 1/255) so file round trips are exact.
struct Corpus {
  int classes = 0;
  int channels = 1;
  int size = 0;  // native square resolution
  std::vector<std::vector<Tensor>> images;  // [class][index] -> (C, H, W)
  std::string provenance = "synthetic";

  int per_class(int c) const { return static_cast<int>(images[static_cast<size_t>(c)].size()); }
  // Synthetic corpora plant two task families: blob classes (first half,
  // pooling-friendly) and stripe classes (second half, convolution-friendly).
  std::vector<int> family_a_classes() const;
  std::vector<int> family_b_classes() const;
  std::vector<int> all_classes() const;
};

struct SyntheticParams {
  int classes = 20;
  int per_class = 24;
  int size = 32;
};

// Deterministic from seed. Family A encodes class identity in the mean
// intensity of a randomly translated soft blob; family B in the orientation
// of a fixed-contrast stripe pattern. Additive Gaussian pixel noise 0.05,
// clamped to [0,1], then u8-quantized.
Corpus generate_synthetic_corpus(std::uint64_t seed, const SyntheticParams& params);

// A sampled classification task: class subset, resolution, split, seed.
struct TaskSpec {
  std::vector<int> class_ids;                // distinct corpus class ids
  int resolution = 0;
  std::vector<std::vector<int>> train_idx;   // per class position
  std::vector<std::vector<int>> val_idx;     // disjoint from train_idx
  std::uint64_t seed = 0;
};

// Uniform class subset without replacement from `pool` (all classes when
// empty), 80/20 train/validation split per class.
TaskSpec sample_task(const Corpus& corpus, int n_classes, int resolution, RngStream& rng,
                     const std::vector<int>& pool = {});

// Task images resampled to the task resolution and stacked; labels are
// positions in class_ids (0..n-1).
struct TaskData {
  Tensor train_x;  // (N, C, r, r)
  std::vector<int> train_y;
  Tensor val_x;
  std::vector<int> val_y;
  int resolution = 0;
};

TaskData materialize_task(const Corpus& corpus, const TaskSpec& spec);

// Shuffled index partition for one pass over n items (last short chunk kept).
std::vector<std::vector<std::int64_t>> epoch_batches(std::int64_t n, int batch_size,
                                                     RngStream& rng);

Batch make_batch(const TaskData& data, const std::vector<std::int64_t>& indices);
Batch full_batch(const Tensor& x, const std::vector<int>& y, int resolution,
                 std::int64_t dataset_size);

// N-way K-shot episode with disjoint support/query and labels remapped
// to 0..n_way-1.
struct Episode {
  int n_way = 0;
  int k_shot = 0;
  Tensor support_x;
  std::vector<int> support_y;
  Tensor query_x;
  std::vector<int> query_y;
  int resolution = 0;
};

Episode sample_episode(const Corpus& corpus, const std::vector<int>& class_pool, int n_way,
                       int k_shot, int query_per_way, int resolution, RngStream& rng);

// Bilinear resampling of one (C, H, W) image; preserves the [0,1] range.
Tensor resample_bilinear(const Tensor& img, int out_size);

}  // namespace metanas
