#include "cabm/pipeline.hpp"

#include <atomic>
#include <fstream>
#include <thread>

#include "cabm/text.hpp"

namespace cabm {

RunResult run_sr(const TensorF& image, SuperNetF& net, const EdgeToBitLUT& lut,
                 int64_t patch_size, const TensorF* hr, int threads) {
  if (lut.layers != net.spec().quantized_layers())
    throw ShapeError("run_sr: LUT has " + std::to_string(lut.layers) + " layers, network has " +
                     std::to_string(net.spec().quantized_layers()));
  auto [grid, patches] = split_patches(image, patch_size);
  const int scale = net.spec().scale;

  std::vector<TensorF> sr_patches(patches.size());
  std::vector<PatchEval> evals(patches.size());
  auto run_one = [&](size_t i) {
    PatchEval pe;
    pe.edge = edge_score(patches[i], lut.F);
    pe.r = subinterval_index(pe.edge.value, lut.F, lut.R);
    pe.config = lut.entries[static_cast<size_t>(pe.r - 1)];
    pe.bitops = network_bitops(net.spec(), pe.config, patch_size, patch_size).total_bitops;
    auto [sr, stats] = net.forward_with_bits(patches[i], pe.config);
    sr_patches[i] = std::move(sr);
    evals[i] = std::move(pe);
  };

  int nthreads = threads > 0 ? threads
                             : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  nthreads = std::max(1, std::min<int>(nthreads, static_cast<int>(patches.size())));
  if (nthreads <= 1) {
    for (size_t i = 0; i < patches.size(); ++i) run_one(i);
  } else {
    std::atomic<size_t> next{0};
    auto worker = [&] {
      while (true) {
        const size_t i = next.fetch_add(1);
        if (i >= patches.size()) break;
        run_one(i);
      }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads - 1; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
  }

  RunResult out;
  out.sr = merge_patches(grid, sr_patches, scale);
  for (auto& v : out.sr.data) v = std::min(1.0f, std::max(0.0f, v));  // final image range
  out.eval.per_patch = std::move(evals);
  double fab_acc = 0.0;
  for (const auto& pe : out.eval.per_patch) {
    fab_acc += config_fab(pe.config);
    out.eval.total_bitops += pe.bitops;
  }
  out.eval.fab = fab_acc / static_cast<double>(out.eval.per_patch.size());
  if (hr != nullptr) {
    out.eval.psnr = psnr(out.sr, *hr);
    out.eval.ssim = ssim(out.sr, *hr);
  }
  return out;
}

std::string EvalResult::to_csv() const {
  std::string out = "# psnr=" + format_double(psnr) + " ssim=" + format_double(ssim) +
                    " fab=" + format_double(fab) + " total_bitops=" + format_double(total_bitops) +
                    " patches=" + std::to_string(per_patch.size()) + "\n";
  const size_t layers = per_patch.empty() ? 0 : per_patch.front().config.size();
  out += "patch,edge,r,bitops,fab";
  for (size_t i = 1; i <= layers; ++i) out += ",b" + std::to_string(i);
  out += "\n";
  for (size_t i = 0; i < per_patch.size(); ++i) {
    const PatchEval& pe = per_patch[i];
    out += std::to_string(i) + "," + format_double(pe.edge.value) + "," + std::to_string(pe.r) +
           "," + format_double(pe.bitops) + "," + format_double(config_fab(pe.config));
    for (int b : pe.config) out += "," + std::to_string(b);
    out += "\n";
  }
  return out;
}

void save_eval_csv(const std::string& path, const EvalResult& eval) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << eval.to_csv();
}

}  // namespace cabm
