#include "cabm/trainer.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <memory>
#include <thread>

#include "cabm/text.hpp"

namespace cabm {

namespace {

class Sgd {
 public:
  Sgd(std::vector<TensorF*> params, double momentum)
      : params_(std::move(params)), momentum_(momentum) {
    for (auto* p : params_) {
      p->ensure_grad();
      vel_.emplace_back(p->data.size(), 0.0f);
    }
  }

  // v = momentum*v - lr*scale*g; p += v; grads cleared
  void step(double lr, double grad_scale) {
    for (size_t i = 0; i < params_.size(); ++i) {
      TensorF& p = *params_[i];
      auto& v = vel_[i];
      for (size_t j = 0; j < v.size(); ++j) {
        v[j] = static_cast<float>(momentum_ * v[j] - lr * grad_scale * p.grad[j]);
        p.data[j] += v[j];
      }
      p.zero_grad();
    }
  }

 private:
  std::vector<TensorF*> params_;
  std::vector<std::vector<float>> vel_;
  double momentum_;
};

double epoch_lr(const TrainConfig& cfg, int epoch) {
  if (!cfg.cosine || cfg.epochs <= 1) return cfg.lr;
  return cfg.lr * 0.5 *
         (1.0 + std::cos(3.14159265358979323846 * epoch / static_cast<double>(cfg.epochs - 1)));
}

int resolve_threads(int requested, size_t work_items) {
  int t = requested > 0 ? requested
                        : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return std::max(1, std::min<int>(t, static_cast<int>(work_items)));
}

struct SampleResult {
  std::unique_ptr<Tape<float>> tape;
  double loss = 0.0;
  double l1 = 0.0;
  double penalty = 0.0;
};

// Runs one forward/backward per index on a small worker pool; gradients are
// merged into the parameters afterwards in sample order, so results do not
// depend on the thread count.
template <typename RunOne>
void run_batch(const std::vector<size_t>& indices, int threads, RunOne&& run_one,
               double* loss_acc, double* l1_acc, double* penalty_acc) {
  std::vector<SampleResult> results(indices.size());
  const int nthreads = resolve_threads(threads, indices.size());
  if (nthreads <= 1) {
    for (size_t i = 0; i < indices.size(); ++i) results[i] = run_one(indices[i]);
  } else {
    std::atomic<size_t> next{0};
    auto worker = [&] {
      while (true) {
        const size_t i = next.fetch_add(1);
        if (i >= indices.size()) break;
        results[i] = run_one(indices[i]);
      }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads - 1; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
  }
  for (auto& res : results) {
    res.tape->apply_leaf_grads();
    *loss_acc += res.loss;
    *l1_acc += res.l1;
    *penalty_acc += res.penalty;
  }
}

std::vector<size_t> shuffled_indices(size_t n, Rng& rng) {
  std::vector<size_t> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = i;
  for (size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.uniform_int(i)]);
  return idx;
}

void clamp_alphas(SuperNetF& net) {
  for (TensorF* a : net.alphas()) a->data[0] = std::max(a->data[0], 1e-4f);
}

void check_finite(double loss, int epoch) {
  if (!std::isfinite(loss))
    throw DivergenceError("training diverged: loss is not finite at epoch " +
                          std::to_string(epoch));
}

// normalized per-layer penalty coefficients: macs_l * bit_i * w_bit over the
// all-8 network cost
std::vector<std::vector<double>> penalty_coefficients(const SupernetSpec& spec, int64_t h,
                                                      int64_t w) {
  const BitConfig all8(spec.quantized_layers(), 8);
  const CostReport base = network_bitops(spec, all8, h, w);
  std::vector<std::vector<double>> coeffs(spec.quantized_layers());
  for (int l = 0; l < spec.quantized_layers(); ++l) {
    for (int bit : spec.candidate_bits)
      coeffs[l].push_back(layer_bitops(base.per_layer[l].macs, bit, spec.weight_bit) /
                          base.total_bitops);
  }
  return coeffs;
}

}  // namespace

std::string loss_curve_csv(const LossCurve& curve) {
  std::string out = "epoch,loss,l1,penalty,lr\n";
  for (const auto& e : curve)
    out += std::to_string(e.epoch) + "," + format_double(e.loss) + "," + format_double(e.l1) +
           "," + format_double(e.penalty) + "," + format_double(e.lr) + "\n";
  return out;
}

void save_loss_curve(const std::string& path, const LossCurve& curve) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << loss_curve_csv(curve);
}

void calibrate_alphas(SuperNetF& net, const Dataset& data, size_t max_samples) {
  if (data.items.empty()) throw Error("calibrate_alphas: empty dataset");
  const size_t n = std::min(max_samples, data.items.size());
  std::vector<std::vector<TensorF>> captured(net.spec().quantized_layers());
  for (size_t i = 0; i < n; ++i) {
    Tape<float> tape;
    net.forward_hooked(tape, data.items[i].lr,
                       [&](int layer, Value<float> x, Value<float>, double) {
                         captured[layer].push_back(x.val());
                         return HookOut<float>{x, kFullPrecisionBits};
                       });
  }
  auto alphas = net.alphas();
  for (size_t l = 0; l < alphas.size(); ++l) {
    std::vector<const TensorF*> ptrs;
    for (const auto& t : captured[l]) ptrs.push_back(&t);
    alphas[l]->data[0] = static_cast<float>(std::max(abs_percentile(ptrs, 99.9), 1e-3));
  }
}

LossCurve train_supernet(SuperNetF& net, std::vector<SelectorMLPF>& selectors, const Dataset& data,
                         const TrainConfig& cfg) {
  if (data.items.empty()) throw Error("train_supernet: empty dataset");
  const auto& first = data.items.front().lr.shape;
  const auto coeffs = penalty_coefficients(net.spec(), first.h, first.w);

  Sgd opt(net.parameters(), cfg.momentum);
  std::vector<TensorF*> sel_params;
  for (auto& sel : selectors)
    for (auto& [name, t] : sel.named_parameters("sel")) sel_params.push_back(t);
  Sgd sel_opt(sel_params, cfg.momentum);

  // edge scores are constant per patch; compute them once
  std::vector<double> edges(data.items.size());
  for (size_t i = 0; i < data.items.size(); ++i)
    edges[i] = edge_score(data.items[i].lr, cfg.edge_precision).value;

  Rng rng = Rng::seeded(cfg.seed);
  LossCurve curve;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = epoch_lr(cfg, epoch);
    auto order = shuffled_indices(data.items.size(), rng);
    double loss_sum = 0, l1_sum = 0, pen_sum = 0;
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::vector<size_t> batch(order.begin() + start, order.begin() + stop);
      run_batch(
          batch, cfg.threads,
          [&](size_t idx) {
            const SamplePair& item = data.items[idx];
            SampleResult res;
            res.tape = std::make_unique<Tape<float>>();
            auto mf = forward_mixture(*res.tape, net, selectors, item.lr, edges[idx]);
            auto l1v = ag::l1_loss(mf.sr, item.hr);
            Value<float> loss = l1v;
            double penalty_val = 0.0;
            if (cfg.lambda_bitops != 0.0) {
              Value<float> pen;
              for (size_t l = 0; l < mf.probs.size(); ++l) {
                auto d = ag::dot_const(mf.probs[l], coeffs[l]);
                pen = l == 0 ? d : ag::add(pen, d);
              }
              penalty_val = pen.val().item();
              loss = ag::add(l1v, ag::scale(pen, cfg.lambda_bitops));
            }
            res.tape->backward(loss);
            res.loss = loss.val().item();
            res.l1 = l1v.val().item();
            res.penalty = penalty_val;
            return res;
          },
          &loss_sum, &l1_sum, &pen_sum);
      opt.step(lr, 1.0 / static_cast<double>(batch.size()));
      sel_opt.step(lr * cfg.selector_lr_mult, 1.0 / static_cast<double>(batch.size()));
      clamp_alphas(net);
    }
    const double n = static_cast<double>(order.size());
    check_finite(loss_sum / n, epoch);
    curve.push_back(EpochLog{epoch, loss_sum / n, l1_sum / n, pen_sum / n, lr});
  }
  return curve;
}

LossCurve train_with_bitops_sampling(SuperNetF& net, const Dataset& data,
                                     const DifficultyLevels& levels, const TrainConfig& cfg) {
  if (data.items.empty()) throw Error("train_with_bitops_sampling: empty dataset");
  Sgd opt(net.parameters(), cfg.momentum);
  Rng rng = Rng::seeded(cfg.seed);
  LossCurve curve;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = epoch_lr(cfg, epoch);
    auto order = shuffled_indices(data.items.size(), rng);
    double loss_sum = 0, l1_sum = 0, pen_sum = 0;
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::vector<size_t> batch(order.begin() + start, order.begin() + stop);
      // draw configs up front so worker scheduling cannot perturb the stream
      std::vector<BitConfig> configs;
      for (size_t i = 0; i < batch.size(); ++i)
        configs.push_back(sample_config(levels, rng).config);
      std::vector<size_t> slots(batch.size());
      for (size_t i = 0; i < slots.size(); ++i) slots[i] = i;
      run_batch(
          slots, cfg.threads,
          [&](size_t slot) {
            const SamplePair& item = data.items[batch[slot]];
            SampleResult res;
            res.tape = std::make_unique<Tape<float>>();
            auto sr = net.forward_with_bits_on_tape(*res.tape, item.lr, configs[slot]);
            auto loss = ag::l1_loss(sr, item.hr);
            res.tape->backward(loss);
            res.loss = res.l1 = loss.val().item();
            return res;
          },
          &loss_sum, &l1_sum, &pen_sum);
      opt.step(lr, 1.0 / static_cast<double>(batch.size()));
      clamp_alphas(net);
    }
    const double n = static_cast<double>(order.size());
    check_finite(loss_sum / n, epoch);
    curve.push_back(EpochLog{epoch, loss_sum / n, l1_sum / n, 0.0, lr});
  }
  return curve;
}

LossCurve finetune_cabm(SuperNetF& net, const EdgeToBitLUT& lut, const Dataset& data,
                        const TrainConfig& cfg) {
  if (data.items.empty()) throw Error("finetune_cabm: empty dataset");
  if (lut.layers != net.spec().quantized_layers())
    throw ShapeError("finetune_cabm: LUT has " + std::to_string(lut.layers) +
                     " layers, network has " + std::to_string(net.spec().quantized_layers()));
  // configurations are a pure function of the patch; freeze them once
  std::vector<BitConfig> configs(data.items.size());
  for (size_t i = 0; i < data.items.size(); ++i)
    configs[i] = lookup(lut, edge_score(data.items[i].lr, lut.F));

  Sgd opt(net.parameters(), cfg.momentum);
  Rng rng = Rng::seeded(cfg.seed);
  LossCurve curve;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = epoch_lr(cfg, epoch);
    auto order = shuffled_indices(data.items.size(), rng);
    double loss_sum = 0, l1_sum = 0, pen_sum = 0;
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::vector<size_t> batch(order.begin() + start, order.begin() + stop);
      run_batch(
          batch, cfg.threads,
          [&](size_t idx) {
            const SamplePair& item = data.items[idx];
            SampleResult res;
            res.tape = std::make_unique<Tape<float>>();
            auto sr = net.forward_with_bits_on_tape(*res.tape, item.lr, configs[idx]);
            auto loss = ag::l1_loss(sr, item.hr);
            res.tape->backward(loss);
            res.loss = res.l1 = loss.val().item();
            return res;
          },
          &loss_sum, &l1_sum, &pen_sum);
      opt.step(lr, 1.0 / static_cast<double>(batch.size()));
      clamp_alphas(net);
    }
    const double n = static_cast<double>(order.size());
    check_finite(loss_sum / n, epoch);
    curve.push_back(EpochLog{epoch, loss_sum / n, l1_sum / n, 0.0, lr});
  }
  return curve;
}

}  // namespace cabm
