#include "cabm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "cabm/image_io.hpp"

namespace fs = std::filesystem;

namespace cabm {

namespace {

void fill_flat(TensorF& img, Rng& rng) {
  for (int64_t c = 0; c < 3; ++c) {
    const float v = static_cast<float>(rng.uniform(0.1, 0.9));
    for (int64_t y = 0; y < img.shape.h; ++y)
      for (int64_t x = 0; x < img.shape.w; ++x) img.at(0, c, y, x) = v;
  }
}

void fill_ramp(TensorF& img, Rng& rng) {
  const double angle = rng.uniform(0.0, 6.2831853);
  const double gx = std::cos(angle), gy = std::sin(angle);
  const double span = static_cast<double>(img.shape.h + img.shape.w);
  for (int64_t c = 0; c < 3; ++c) {
    const double lo = rng.uniform(0.05, 0.45), hi = rng.uniform(0.55, 0.95);
    for (int64_t y = 0; y < img.shape.h; ++y)
      for (int64_t x = 0; x < img.shape.w; ++x) {
        const double t = 0.5 + (gx * x + gy * y) / span;
        img.at(0, c, y, x) = static_cast<float>(lo + (hi - lo) * std::clamp(t, 0.0, 1.0));
      }
  }
}

void fill_blob(TensorF& img, Rng& rng) {
  fill_flat(img, rng);
  const int blobs = 1 + static_cast<int>(rng.uniform_int(3));
  for (int i = 0; i < blobs; ++i) {
    const double cy = rng.uniform(0.2, 0.8) * img.shape.h;
    const double cx = rng.uniform(0.2, 0.8) * img.shape.w;
    const double sigma = rng.uniform(0.1, 0.3) * std::min(img.shape.h, img.shape.w);
    const double amp[3] = {rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4),
                           rng.uniform(-0.4, 0.4)};
    for (int64_t c = 0; c < 3; ++c)
      for (int64_t y = 0; y < img.shape.h; ++y)
        for (int64_t x = 0; x < img.shape.w; ++x) {
          const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
          const double v = img.at(0, c, y, x) + amp[c] * std::exp(-d2 / (2 * sigma * sigma));
          img.at(0, c, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
  }
}

void fill_checker(TensorF& img, Rng& rng) {
  const int64_t cell = 2 + 2 * rng.uniform_int(4);  // 2, 4, 6, 8
  float a[3], b[3];
  for (int c = 0; c < 3; ++c) {
    a[c] = static_cast<float>(rng.uniform(0.0, 0.35));
    b[c] = static_cast<float>(rng.uniform(0.65, 1.0));
  }
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t y = 0; y < img.shape.h; ++y)
      for (int64_t x = 0; x < img.shape.w; ++x)
        img.at(0, c, y, x) = ((y / cell + x / cell) % 2 == 0) ? a[c] : b[c];
}

void fill_band_noise(TensorF& img, Rng& rng) {
  // a few random sinusoids per channel keeps the spectrum band-limited
  for (int64_t c = 0; c < 3; ++c) {
    struct Wave {
      double fx, fy, phase, amp;
    };
    Wave waves[4];
    for (auto& w : waves) {
      w.fx = rng.uniform(0.05, 0.45);
      w.fy = rng.uniform(0.05, 0.45);
      w.phase = rng.uniform(0.0, 6.2831853);
      w.amp = rng.uniform(0.05, 0.2);
    }
    for (int64_t y = 0; y < img.shape.h; ++y)
      for (int64_t x = 0; x < img.shape.w; ++x) {
        double v = 0.5;
        for (const auto& w : waves)
          v += w.amp * std::cos(6.2831853 * (w.fx * x + w.fy * y) + w.phase);
        img.at(0, c, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
  }
}

}  // namespace

TensorF synth_image(PatternKind kind, int64_t h, int64_t w, Rng& rng) {
  TensorF img({1, 3, h, w});
  switch (kind) {
    case PatternKind::Flat: fill_flat(img, rng); break;
    case PatternKind::Ramp: fill_ramp(img, rng); break;
    case PatternKind::Blob: fill_blob(img, rng); break;
    case PatternKind::Checker: fill_checker(img, rng); break;
    case PatternKind::BandNoise: fill_band_noise(img, rng); break;
  }
  return img;
}

TensorF downsample_box(const TensorF& hr, int scale) {
  if (scale <= 0) throw Error("downsample_box: scale must be positive");
  if (hr.shape.h % scale != 0 || hr.shape.w % scale != 0)
    throw ShapeError("downsample_box: dims " + hr.shape.str() + " not divisible by scale " +
                     std::to_string(scale));
  TensorF lr({hr.shape.n, hr.shape.c, hr.shape.h / scale, hr.shape.w / scale});
  const double inv = 1.0 / (scale * scale);
  for (int64_t n = 0; n < hr.shape.n; ++n)
    for (int64_t c = 0; c < hr.shape.c; ++c)
      for (int64_t y = 0; y < lr.shape.h; ++y)
        for (int64_t x = 0; x < lr.shape.w; ++x) {
          double acc = 0.0;
          for (int dy = 0; dy < scale; ++dy)
            for (int dx = 0; dx < scale; ++dx)
              acc += hr.at(n, c, y * scale + dy, x * scale + dx);
          lr.at(n, c, y, x) = static_cast<float>(acc * inv);
        }
  return lr;
}

Dataset make_synthetic_dataset(int count, int64_t lr_size, int scale, uint64_t seed) {
  if (count <= 0) throw Error("make_synthetic_dataset: count must be positive");
  static constexpr PatternKind kCycle[] = {PatternKind::Flat, PatternKind::Checker,
                                           PatternKind::Ramp, PatternKind::BandNoise,
                                           PatternKind::Blob};
  Rng rng = Rng::seeded(seed);
  Dataset data;
  data.scale = scale;
  for (int i = 0; i < count; ++i) {
    SamplePair pair;
    pair.hr = synth_image(kCycle[i % 5], lr_size * scale, lr_size * scale, rng);
    pair.lr = downsample_box(pair.hr, scale);
    data.items.push_back(std::move(pair));
  }
  return data;
}

TensorF make_half_split_image(int64_t h, int64_t w, uint64_t seed) {
  Rng rng = Rng::seeded(seed);
  TensorF left = synth_image(rng.uniform() < 0.5 ? PatternKind::Flat : PatternKind::Ramp, h, w,
                             rng);
  TensorF right = synth_image(PatternKind::Checker, h, w, rng);
  TensorF out({1, 3, h, w});
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x)
        out.at(0, c, y, x) = x < w / 2 ? left.at(0, c, y, x) : right.at(0, c, y, x);
  return out;
}

Dataset load_dataset_dir(const std::string& dir, int scale) {
  const fs::path lr_dir = fs::path(dir) / "lr";
  const fs::path hr_dir = fs::path(dir) / "hr";
  if (!fs::is_directory(lr_dir) || !fs::is_directory(hr_dir))
    throw Error("dataset dir '" + dir + "' must contain lr/ and hr/ subdirectories");
  std::vector<fs::path> names;
  for (const auto& entry : fs::directory_iterator(lr_dir))
    if (entry.is_regular_file()) names.push_back(entry.path().filename());
  std::sort(names.begin(), names.end());
  if (names.empty()) throw Error("dataset dir '" + dir + "' has no LR images");

  Dataset data;
  data.scale = scale;
  for (const auto& name : names) {
    SamplePair pair;
    pair.lr = ensure_rgb(load_image((lr_dir / name).string()));
    const fs::path hr_path = hr_dir / name;
    if (!fs::exists(hr_path)) throw Error("missing HR partner for '" + name.string() + "'");
    pair.hr = ensure_rgb(load_image(hr_path.string()));
    if (pair.hr.shape.h != pair.lr.shape.h * scale || pair.hr.shape.w != pair.lr.shape.w * scale)
      throw ShapeError("HR dims " + pair.hr.shape.str() + " are not " + std::to_string(scale) +
                       "x the LR dims " + pair.lr.shape.str() + " for '" + name.string() + "'");
    data.items.push_back(std::move(pair));
  }
  return data;
}

void save_dataset_dir(const std::string& dir, const Dataset& data) {
  fs::create_directories(fs::path(dir) / "lr");
  fs::create_directories(fs::path(dir) / "hr");
  char name[32];
  for (size_t i = 0; i < data.items.size(); ++i) {
    std::snprintf(name, sizeof(name), "%03zu.png", i);
    save_image((fs::path(dir) / "lr" / name).string(), data.items[i].lr);
    save_image((fs::path(dir) / "hr" / name).string(), data.items[i].hr);
  }
}

}  // namespace cabm
