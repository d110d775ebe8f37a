#include "spadsr/trainer.hpp"

#include <cmath>
#include <ostream>
#include <thread>

#include "spadsr/errors.hpp"
#include "spadsr/metrics.hpp"
#include "spadsr/rng.hpp"

namespace spadsr {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (!(lr0 > 0)) throw ConfigError("lr0 must be positive");
  if (lr_step_epochs < 1) throw ConfigError("lr_step_epochs must be positive");
  if (!(lr_divisor > 1)) throw ConfigError("lr_divisor must exceed 1");
  if (patience < 1) throw ConfigError("patience must be positive");
  if (patience > epochs) throw ConfigError("patience must not exceed epochs");
  if (!(huber_delta > 0)) throw ConfigError("huber_delta must be positive");
  if (!(beta1 > 0 && beta1 < 1) || !(beta2 > 0 && beta2 < 1))
    throw ConfigError("adam betas must lie in (0,1)");
  if (!(adam_eps > 0)) throw ConfigError("adam_eps must be positive");
  if (!(bn_momentum >= 0 && bn_momentum < 1))
    throw ConfigError("bn_momentum must lie in [0,1)");
  if (n_threads < 1) throw ConfigError("n_threads must be positive");
}

double TrainConfig::lr_at(int epoch) const {
  const int steps = (epoch - 1) / lr_step_epochs;
  return lr0 / std::pow(lr_divisor, steps);
}

double huber_value(const Image& pred, const Image& target, double delta) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(),
          "huber_value: shape mismatch");
  require(delta > 0, "huber delta must be positive");
  double total = 0.0;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const double e = std::abs(pred.data()[i] - target.data()[i]);
    total += e <= delta ? 0.5 * e * e : delta * e - 0.5 * delta * delta;
  }
  return total / static_cast<double>(pred.size());
}

void AdamState::reset(const std::vector<ad::Tensor>& params) {
  m.clear();
  v.clear();
  for (const auto& p : params) {
    m.push_back(Eigen::ArrayXd::Zero(p.size()));
    v.push_back(Eigen::ArrayXd::Zero(p.size()));
  }
  step = 0;
}

void adam_step(std::vector<ad::Tensor>& params,
               const std::vector<Eigen::ArrayXd>& grads, AdamState& state,
               double lr, double beta1, double beta2, double eps) {
  require(params.size() == grads.size() && params.size() == state.m.size(),
          "adam_step: parameter/gradient/state count mismatch");
  ++state.step;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Eigen::ArrayXd& g = grads[i];
    if (!g.isFinite().all())
      throw NumericalError("non-finite gradient in parameter " +
                           std::to_string(i) + " at step " +
                           std::to_string(state.step));
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g.square();
    params[i].value() -=
        lr * (state.m[i] / bc1) / ((state.v[i] / bc2).sqrt() + eps);
  }
}

namespace {

struct MemberResult {
  double loss = 0.0;
  std::vector<Eigen::ArrayXd> grads;      // per parameter, unscaled
  std::vector<ad::BnStats> stats;
};

// Forward + backward for one batch member on the shared parameters. Safe to
// run concurrently: gradients live in a per-call store.
MemberResult run_member(const DufNet& net, const TrainingExample& ex,
                        const std::vector<ad::Tensor>& params, double delta) {
  MemberResult out;
  ad::Tensor window = window_to_tensor(ex.input);
  ad::Tensor pred = net.forward(window, /*training=*/true, &out.stats);
  Eigen::Map<const Eigen::ArrayXd> target(ex.target.data(), ex.target.size());
  ad::Tensor loss = ad::huber_loss(pred, target, delta);
  out.loss = loss.scalar();
  ad::GradStore store = ad::backward(loss);
  out.grads.reserve(params.size());
  for (const auto& p : params) {
    if (store.has(p.node().get()))
      out.grads.push_back(store[p]);
    else
      out.grads.push_back(Eigen::ArrayXd::Zero(p.size()));
  }
  return out;
}

}  // namespace

TrainResult fit(DufNet& net, const std::vector<TrainingExample>& train_set,
                const std::vector<TrainingExample>& val_set,
                const TrainConfig& cfg, std::ostream* progress) {
  cfg.validate();
  require(!train_set.empty() && !val_set.empty(),
          "fit: train and validation sets must be non-empty");
  const int expect_len = net.config().window_length();
  for (const auto& ex : train_set)
    require(static_cast<int>(ex.input.size()) == expect_len,
            "training window length does not match the network");

  TrainResult result;
  auto params = net.parameters();
  AdamState adam;
  adam.reset(params);

  std::vector<Eigen::ArrayXd> best = net.snapshot();
  int epochs_since_best = 0;
  const std::size_t n = train_set.size();
  const int n_layers = net.n_norm_layers();

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = cfg.lr_at(epoch);
    std::vector<std::size_t> order = shuffle_permutation(
        n, cfg.seed ^ (0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(epoch)));

    double epoch_loss_sum = 0.0;
    bool diverged = false;
    std::string diagnostic;

    for (std::size_t start = 0; start < n && !diverged; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      const int members = static_cast<int>(stop - start);
      std::vector<MemberResult> results(members);

      auto work = [&](int first, int stride) {
        for (int i = first; i < members; i += stride)
          results[i] =
              run_member(net, train_set[order[start + i]], params, cfg.huber_delta);
      };
      const int workers = std::min(cfg.n_threads, members);
      if (workers <= 1) {
        work(0, 1);
      } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
        for (auto& t : pool) t.join();
      }

      // Fixed-order reduction: member index order, independent of threads.
      std::vector<Eigen::ArrayXd> grads;
      grads.reserve(params.size());
      for (const auto& p : params) grads.push_back(Eigen::ArrayXd::Zero(p.size()));
      std::vector<ad::BnStats> stats(n_layers);
      for (int l = 0; l < n_layers; ++l) {
        stats[l].mean = Eigen::ArrayXd::Zero(results[0].stats[l].mean.size());
        stats[l].var = Eigen::ArrayXd::Zero(results[0].stats[l].var.size());
      }
      double batch_loss = 0.0;
      const double inv = 1.0 / members;
      for (const auto& r : results) {
        batch_loss += r.loss * inv;
        for (std::size_t i = 0; i < grads.size(); ++i) grads[i] += inv * r.grads[i];
        for (int l = 0; l < n_layers; ++l) {
          stats[l].mean += inv * r.stats[l].mean;
          stats[l].var += inv * r.stats[l].var;
        }
      }
      epoch_loss_sum += batch_loss * members;

      if (!std::isfinite(batch_loss)) {
        diverged = true;
        diagnostic = "non-finite training loss";
        break;
      }
      try {
        adam_step(params, grads, adam, lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
      } catch (const NumericalError& e) {
        diverged = true;
        diagnostic = e.what();
        break;
      }
      net.update_running_stats(stats, cfg.bn_momentum);
    }

    if (diverged) {
      if (progress)
        *progress << "epoch " << epoch << ": aborted (" << diagnostic << ")\n";
      result.aborted = true;
      break;
    }

    double val_loss = 0.0, val_psnr = 0.0;
    for (const auto& ex : val_set) {
      const Image pred = net.infer(ex.input);
      val_loss += huber_value(pred, ex.target, cfg.huber_delta);
      val_psnr += psnr(pred, ex.target);
    }
    val_loss /= static_cast<double>(val_set.size());
    val_psnr /= static_cast<double>(val_set.size());

    EpochLog entry{epoch, lr, epoch_loss_sum / static_cast<double>(n), val_loss,
                   val_psnr};
    result.log.push_back(entry);
    if (progress)
      *progress << "epoch " << epoch << ": lr=" << lr
                << " train_loss=" << entry.train_loss << " val_loss=" << val_loss
                << " val_psnr=" << val_psnr << "\n";

    if (val_loss < result.best_val_loss) {
      result.best_val_loss = val_loss;
      result.best_epoch = epoch;
      best = net.snapshot();
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
      if (epochs_since_best >= cfg.patience) {
        result.early_stopped = true;
        break;
      }
    }
    if (!std::isfinite(val_loss)) {
      result.aborted = true;
      break;
    }
  }

  net.restore(best);
  return result;
}

void write_train_log_csv(std::ostream& os, const std::vector<EpochLog>& log,
                         const std::string& config_hash) {
  os << "# config-hash=" << config_hash << "\n";
  os << "epoch,lr,train_loss,val_loss,val_psnr\n";
  for (const auto& e : log)
    os << e.epoch << "," << format_metric(e.lr) << ","
       << format_metric(e.train_loss) << "," << format_metric(e.val_loss) << ","
       << format_metric(e.val_psnr) << "\n";
}

}  // namespace spadsr
