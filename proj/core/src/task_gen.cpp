#include "metanas/task_gen.hpp"

#include <algorithm>
#include <cmath>

#include "metanas/errors.hpp"

namespace metanas {

namespace {

constexpr double kPixelNoiseSigma = 0.05;

double quantize_u8(double v) {
  v = std::clamp(v, 0.0, 1.0);
  return std::round(v * 255.0) / 255.0;
}

Tensor blob_image(int size, double level_amplitude, RngStream& rng) {
  // Soft isotropic blob; sigma sized so the class-mean gaps dominate the
  // GAP-level pixel noise, margin keeps the mass inside the frame.
  const double sigma = size / 6.0;
  const double margin = 1.5 * sigma;
  const double bg = 0.1;
  const double cx = margin + rng.uniform() * (size - 2.0 * margin);
  const double cy = margin + rng.uniform() * (size - 2.0 * margin);
  Tensor img = Tensor::zeros({1, size, size});
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double dx = x - cx, dy = y - cy;
      const double b = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      double v = bg + level_amplitude * b + kPixelNoiseSigma * rng.normal();
      img.data[static_cast<size_t>(y) * size + x] = quantize_u8(v);
    }
  }
  return img;
}

Tensor stripe_image(int size, double angle, RngStream& rng) {
  const double frequency = 4.0;  // cycles across the frame
  const double contrast = 0.18;  // fixed std after normalization
  const double phase = rng.uniform() * 2.0 * M_PI;
  const double cx = std::cos(angle), sy = std::sin(angle);
  Tensor raw = Tensor::zeros({1, size, size});
  double mean = 0.0;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double t = (cx * (x - size / 2.0) + sy * (y - size / 2.0)) / size;
      const double v = std::sin(2.0 * M_PI * frequency * t + phase);
      raw.data[static_cast<size_t>(y) * size + x] = v;
      mean += v;
    }
  }
  mean /= raw.numel();
  double var = 0.0;
  for (double v : raw.data) var += (v - mean) * (v - mean);
  const double std_dev = std::sqrt(var / raw.numel());
  Tensor img = Tensor::zeros({1, size, size});
  for (size_t i = 0; i < raw.data.size(); ++i) {
    // Exactly mean 0.5 and std `contrast` before noise: orientation is the
    // only class signal.
    double v = 0.5 + contrast * (raw.data[i] - mean) / std_dev;
    v += kPixelNoiseSigma * rng.normal();
    img.data[i] = quantize_u8(v);
  }
  return img;
}

}  // namespace

std::vector<int> Corpus::family_a_classes() const {
  std::vector<int> out;
  for (int c = 0; c < classes / 2; ++c) out.push_back(c);
  return out;
}

std::vector<int> Corpus::family_b_classes() const {
  std::vector<int> out;
  for (int c = classes / 2; c < classes; ++c) out.push_back(c);
  return out;
}

std::vector<int> Corpus::all_classes() const {
  std::vector<int> out;
  for (int c = 0; c < classes; ++c) out.push_back(c);
  return out;
}

Corpus generate_synthetic_corpus(std::uint64_t seed, const SyntheticParams& params) {
  if (params.classes < 4) {
    throw ConfigError("synthetic corpus: need >= 4 classes (two families x >= 2)");
  }
  if (params.size < 8) throw ConfigError("synthetic corpus: size must be >= 8");
  if (params.per_class < 2) throw ConfigError("synthetic corpus: per_class must be >= 2");

  Corpus corpus;
  corpus.classes = params.classes;
  corpus.channels = 1;
  corpus.size = params.size;
  corpus.provenance = "synthetic";
  corpus.images.resize(static_cast<size_t>(params.classes));

  const int family_a = params.classes / 2;
  const int family_b = params.classes - family_a;
  for (int c = 0; c < params.classes; ++c) {
    auto& list = corpus.images[static_cast<size_t>(c)];
    list.reserve(static_cast<size_t>(params.per_class));
    for (int i = 0; i < params.per_class; ++i) {
      RngStream rng = make_stream(seed, "corpus-img", static_cast<std::uint64_t>(c),
                                  static_cast<std::uint64_t>(i));
      if (c < family_a) {
        const double amp = 0.15 + 0.75 * (family_a > 1 ? static_cast<double>(c) / (family_a - 1) : 0.0);
        list.push_back(blob_image(params.size, amp, rng));
      } else {
        const int idx = c - family_a;
        const double angle = M_PI * (family_b > 0 ? static_cast<double>(idx) / family_b : 0.0);
        list.push_back(stripe_image(params.size, angle, rng));
      }
    }
  }
  return corpus;
}

Tensor resample_bilinear(const Tensor& img, int out_size) {
  const int C = img.dim(0), H = img.dim(1), W = img.dim(2);
  if (H == out_size && W == out_size) return img;
  Tensor out = Tensor::zeros({C, out_size, out_size});
  const double sy = static_cast<double>(H) / out_size;
  const double sx = static_cast<double>(W) / out_size;
  for (int c = 0; c < C; ++c) {
    for (int oy = 0; oy < out_size; ++oy) {
      const double fy = std::clamp((oy + 0.5) * sy - 0.5, 0.0, H - 1.0);
      const int y0 = static_cast<int>(fy);
      const int y1 = std::min(y0 + 1, H - 1);
      const double wy = fy - y0;
      for (int ox = 0; ox < out_size; ++ox) {
        const double fx = std::clamp((ox + 0.5) * sx - 0.5, 0.0, W - 1.0);
        const int x0 = static_cast<int>(fx);
        const int x1 = std::min(x0 + 1, W - 1);
        const double wx = fx - x0;
        auto px = [&](int y, int x) {
          return img.data[(static_cast<size_t>(c) * H + y) * W + x];
        };
        const double top = px(y0, x0) * (1.0 - wx) + px(y0, x1) * wx;
        const double bot = px(y1, x0) * (1.0 - wx) + px(y1, x1) * wx;
        out.data[(static_cast<size_t>(c) * out_size + oy) * out_size + ox] =
            top * (1.0 - wy) + bot * wy;
      }
    }
  }
  return out;
}

TaskSpec sample_task(const Corpus& corpus, int n_classes, int resolution, RngStream& rng,
                     const std::vector<int>& pool) {
  std::vector<int> candidates = pool.empty() ? corpus.all_classes() : pool;
  if (static_cast<int>(candidates.size()) < n_classes) {
    throw ConfigError("sample_task: pool has " + std::to_string(candidates.size()) +
                      " classes, need " + std::to_string(n_classes));
  }
  TaskSpec spec;
  spec.resolution = resolution;
  spec.seed = rng.key();
  // Uniform subset without replacement (partial Fisher-Yates).
  for (int i = 0; i < n_classes; ++i) {
    const auto j = i + static_cast<int>(rng.uniform_int(candidates.size() - static_cast<size_t>(i)));
    std::swap(candidates[static_cast<size_t>(i)], candidates[static_cast<size_t>(j)]);
    spec.class_ids.push_back(candidates[static_cast<size_t>(i)]);
  }
  for (int c : spec.class_ids) {
    const int n = corpus.per_class(c);
    std::vector<int> idx(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
    for (int i = n - 1; i > 0; --i) {
      const auto j = rng.uniform_int(static_cast<std::uint64_t>(i) + 1);
      std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    }
    const int n_val = std::max(1, n / 5);
    spec.val_idx.emplace_back(idx.begin(), idx.begin() + n_val);
    spec.train_idx.emplace_back(idx.begin() + n_val, idx.end());
  }
  return spec;
}

namespace {

void stack_split(const Corpus& corpus, const TaskSpec& spec,
                 const std::vector<std::vector<int>>& split, Tensor& x_out,
                 std::vector<int>& y_out) {
  std::int64_t n = 0;
  for (const auto& v : split) n += static_cast<std::int64_t>(v.size());
  const int r = spec.resolution;
  x_out = Tensor::zeros({static_cast<int>(n), corpus.channels, r, r});
  y_out.clear();
  std::int64_t at = 0;
  for (size_t pos = 0; pos < spec.class_ids.size(); ++pos) {
    const int c = spec.class_ids[pos];
    for (int i : split[pos]) {
      Tensor img = resample_bilinear(corpus.images[static_cast<size_t>(c)][static_cast<size_t>(i)], r);
      std::copy(img.data.begin(), img.data.end(),
                x_out.data.begin() + at * img.numel());
      y_out.push_back(static_cast<int>(pos));
      ++at;
    }
  }
}

}  // namespace

TaskData materialize_task(const Corpus& corpus, const TaskSpec& spec) {
  TaskData data;
  data.resolution = spec.resolution;
  stack_split(corpus, spec, spec.train_idx, data.train_x, data.train_y);
  stack_split(corpus, spec, spec.val_idx, data.val_x, data.val_y);
  return data;
}

std::vector<std::vector<std::int64_t>> epoch_batches(std::int64_t n, int batch_size,
                                                     RngStream& rng) {
  std::vector<std::int64_t> order(static_cast<size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  for (std::int64_t i = n - 1; i > 0; --i) {
    const auto j = rng.uniform_int(static_cast<std::uint64_t>(i) + 1);
    std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
  }
  std::vector<std::vector<std::int64_t>> out;
  for (std::int64_t at = 0; at < n; at += batch_size) {
    const std::int64_t end = std::min<std::int64_t>(n, at + batch_size);
    out.emplace_back(order.begin() + at, order.begin() + end);
  }
  return out;
}

Batch make_batch(const TaskData& data, const std::vector<std::int64_t>& indices) {
  const int C = data.train_x.dim(1), r = data.resolution;
  Batch b;
  b.resolution = r;
  b.dataset_size = data.train_x.dim(0);
  b.x = Tensor::zeros({static_cast<int>(indices.size()), C, r, r});
  const std::int64_t img_elems = static_cast<std::int64_t>(C) * r * r;
  for (size_t k = 0; k < indices.size(); ++k) {
    const std::int64_t i = indices[k];
    std::copy(data.train_x.data.begin() + i * img_elems,
              data.train_x.data.begin() + (i + 1) * img_elems,
              b.x.data.begin() + static_cast<std::int64_t>(k) * img_elems);
    b.labels.push_back(data.train_y[static_cast<size_t>(i)]);
  }
  return b;
}

Batch full_batch(const Tensor& x, const std::vector<int>& y, int resolution,
                 std::int64_t dataset_size) {
  Batch b;
  b.x = x;
  b.labels = y;
  b.resolution = resolution;
  b.dataset_size = dataset_size;
  return b;
}

Episode sample_episode(const Corpus& corpus, const std::vector<int>& class_pool, int n_way,
                       int k_shot, int query_per_way, int resolution, RngStream& rng) {
  if (static_cast<int>(class_pool.size()) < n_way) {
    throw ConfigError("sample_episode: pool has " + std::to_string(class_pool.size()) +
                      " classes, need " + std::to_string(n_way));
  }
  std::vector<int> candidates = class_pool;
  std::vector<int> ways;
  for (int i = 0; i < n_way; ++i) {
    const auto j = i + static_cast<int>(rng.uniform_int(candidates.size() - static_cast<size_t>(i)));
    std::swap(candidates[static_cast<size_t>(i)], candidates[static_cast<size_t>(j)]);
    ways.push_back(candidates[static_cast<size_t>(i)]);
  }

  Episode ep;
  ep.n_way = n_way;
  ep.k_shot = k_shot;
  ep.resolution = resolution;
  const int C = corpus.channels;
  ep.support_x = Tensor::zeros({n_way * k_shot, C, resolution, resolution});
  ep.query_x = Tensor::zeros({n_way * query_per_way, C, resolution, resolution});
  const std::int64_t img_elems = static_cast<std::int64_t>(C) * resolution * resolution;
  std::int64_t s_at = 0, q_at = 0;
  for (int w = 0; w < n_way; ++w) {
    const int c = ways[static_cast<size_t>(w)];
    const int n = corpus.per_class(c);
    if (n < k_shot + query_per_way) {
      throw ConfigError("sample_episode: class " + std::to_string(c) + " has only " +
                        std::to_string(n) + " examples");
    }
    std::vector<int> idx(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
    for (int i = n - 1; i > 0; --i) {
      const auto j = rng.uniform_int(static_cast<std::uint64_t>(i) + 1);
      std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    }
    for (int k = 0; k < k_shot; ++k, ++s_at) {
      Tensor img = resample_bilinear(
          corpus.images[static_cast<size_t>(c)][static_cast<size_t>(idx[static_cast<size_t>(k)])],
          resolution);
      std::copy(img.data.begin(), img.data.end(), ep.support_x.data.begin() + s_at * img_elems);
      ep.support_y.push_back(w);
    }
    for (int q = 0; q < query_per_way; ++q, ++q_at) {
      Tensor img = resample_bilinear(
          corpus.images[static_cast<size_t>(c)]
                       [static_cast<size_t>(idx[static_cast<size_t>(k_shot + q)])],
          resolution);
      std::copy(img.data.begin(), img.data.end(), ep.query_x.data.begin() + q_at * img_elems);
      ep.query_y.push_back(w);
    }
  }
  return ep;
}

}  // namespace metanas
