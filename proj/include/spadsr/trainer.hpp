#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "spadsr/data.hpp"
#include "spadsr/dufnet.hpp"

namespace spadsr {

struct TrainConfig {
  int epochs = 30;        // desk-scale cap; raise to 100 for the full schedule
  int batch_size = 4;
  double lr0 = 0.001;
  int lr_step_epochs = 10;  // learning rate divides by lr_divisor this often
  double lr_divisor = 10.0;
  int patience = 5;  // epochs without val-loss improvement before stopping
  double huber_delta = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double bn_momentum = 0.9;
  std::uint64_t seed = 0;
  int n_threads = 1;

  void validate() const;   // throws ConfigError
  double lr_at(int epoch) const;  // epoch is 1-based
};

/// Mean elementwise Huber loss (quadratic within +-delta, linear outside).
double huber_value(const Image& pred, const Image& target, double delta);

struct AdamState {
  std::vector<Eigen::ArrayXd> m, v;
  long step = 0;
  void reset(const std::vector<ad::Tensor>& params);
};

/// One bias-corrected Adam update. Throws NumericalError on a non-finite
/// gradient. grads[i] pairs with params[i].
void adam_step(std::vector<ad::Tensor>& params,
               const std::vector<Eigen::ArrayXd>& grads, AdamState& state,
               double lr, double beta1, double beta2, double eps);

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_psnr = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  int best_epoch = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
  bool early_stopped = false;
  bool aborted = false;  // non-finite loss or gradient ended training early
};

/// Minimizes the Huber loss with Adam over shuffled mini-batches, evaluating
/// the validation loss and PSNR each epoch. Leaves `net` holding the weights
/// of the best validation epoch. Bit-reproducible for a fixed seed and
/// independent of n_threads (fixed-order reductions).
TrainResult fit(DufNet& net, const std::vector<TrainingExample>& train_set,
                const std::vector<TrainingExample>& val_set,
                const TrainConfig& cfg, std::ostream* progress = nullptr);

void write_train_log_csv(std::ostream& os, const std::vector<EpochLog>& log,
                         const std::string& config_hash);

}  // namespace spadsr
