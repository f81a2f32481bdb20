#ifndef SYNTHVQA_ALIGN_HPP
#define SYNTHVQA_ALIGN_HPP

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace synthvqa {

class Rng;

struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// MMD

struct KernelConfig {
  // RBF bandwidth sigma; <= 0 selects the median heuristic on the pooled
  // pairwise distances.
  double bandwidth = 0.0;
};

double median_heuristic_bandwidth(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);

// Biased V-statistic estimate with an RBF kernel. Rows are samples.
double mmd(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const KernelConfig& k = {});

struct MmdWithGrad {
  double value = 0.0;
  Eigen::MatrixXd dx, dy;
};

// Gradient treats the bandwidth as a constant.
MmdWithGrad mmd_with_grad(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double bandwidth);

// ---------------------------------------------------------------------------
// Parameters, layers, optimizer

struct Tensor {
  std::string name;
  Eigen::MatrixXd value;
  Eigen::MatrixXd grad;
  Eigen::MatrixXd adam_m, adam_v;

  void init(const std::string& n, int rows, int cols, Rng& rng, double scale);
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.8;
  double beta2 = 0.8;
  double eps = 1e-4;
  double weight_decay = 1e-4;
};

struct Adam {
  AdamConfig cfg;
  long step_count = 0;

  void step(const std::vector<Tensor*>& params);
};

// Fully connected layer over row-major sample batches: Y = X W^T + b.
struct Dense {
  Tensor w, b;

  void init(const std::string& name, int in, int out, Rng& rng);
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
  // Accumulates parameter gradients and returns dL/dX. x is the cached input.
  Eigen::MatrixXd backward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& dy);
  std::vector<Tensor*> params() { return {&w, &b}; }
};

// Two dense layers with max(0, .) between them.
struct Mlp {
  Dense first, second;

  void init(const std::string& name, int in, int hidden, int out, Rng& rng);

  struct Cache {
    Eigen::MatrixXd input, pre, hidden;
  };
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Cache* cache = nullptr) const;
  Eigen::MatrixXd backward(const Cache& cache, const Eigen::MatrixXd& dy);
  std::vector<Tensor*> params();
};

// ---------------------------------------------------------------------------
// Alignment models

struct Autoencoder {
  Mlp encoder, decoder;

  void init(const std::string& name, int dim, int hidden, Rng& rng);
  std::vector<Tensor*> params();
};

// Adversarial variant: a reconstruction pair per domain plus one domain head
// fed by the shared latent, trained through the gradient reversal point.
struct AutoencoderPair {
  Autoencoder primary;  // real domain
  Autoencoder twin;     // synthetic domain
  Dense domain_head;    // latent -> 1 logit

  void init(int dim, int hidden, Rng& rng);
  std::vector<Tensor*> params();
};

struct MmdAlignModel {
  Autoencoder real;
  Autoencoder synth_w, synth_h;
  bool has_w = true, has_h = false;

  void init(int dim, int hidden, Rng& rng);
  std::vector<Tensor*> params();
};

struct AlignConfig {
  double alpha = 0.4;  // MMD weight for W / adversarial domain weight
  double beta = 0.6;   // MMD weight for H
  bool use_alpha_schedule = true;  // adversarial: alpha follows alpha_schedule(p)
  AdamConfig adam;
  KernelConfig kernel;
  int hidden = 32;
  int ae_epochs = 20;  // two-stage training: autoencoder epochs first
  int downstream_epochs = 5;
  int batch_size = 32;
};

struct LossReport {
  double l_r = 0.0;      // reconstruction
  double l_d = 0.0;      // adversarial domain log-loss
  double l_dw = 0.0;     // MMD(E(X_R), E_W(X_W))
  double l_dh = 0.0;     // MMD(E(X_R), E_H(X_H))
  double l_total = 0.0;  // exactly as summed from the parts
};

// Monotone schedule 2 / (1 + exp(-10 p)) - 1, from 0 toward tanh(5).
double alpha_schedule(double p);

// One adversarial update. Returns losses from the forward pass, before the
// update. p in [0, 1] is training progress for the alpha schedule.
LossReport grl_train_step(const Eigen::MatrixXd& batch_r, const Eigen::MatrixXd& batch_s,
                          AutoencoderPair& model, AlignConfig& cfg, Adam& opt, double p);

// Encoder-parameter gradient of the domain loss alone, with the reversal
// point scaled by reversal_scale (+1 = no reversal). Used by the reversal
// identity checks; does not update parameters.
std::vector<Eigen::MatrixXd> grl_encoder_domain_gradient(const Eigen::MatrixXd& batch_r,
                                                         const Eigen::MatrixXd& batch_s,
                                                         AutoencoderPair& model,
                                                         double reversal_scale);

// One MMD-alignment update with alpha/beta weights. batch_h may have zero
// rows when has_h is false.
LossReport mmd_align_train_step(const Eigen::MatrixXd& batch_r, const Eigen::MatrixXd& batch_w,
                                const Eigen::MatrixXd& batch_h, MmdAlignModel& model,
                                AlignConfig& cfg, Adam& opt);

// Max relative error between the analytic gradient and central differences.
// loss_with_grad must zero and then fill every param's grad; it is re-invoked
// for the perturbed evaluations (gradients ignored there).
double grad_check(const std::function<double()>& loss_with_grad,
                  const std::vector<Tensor*>& params, double epsilon);

// ---------------------------------------------------------------------------
// Checkpoints and loss curves

void save_checkpoint(const std::string& path, const std::vector<Tensor*>& params);
void load_checkpoint(const std::string& path, const std::vector<Tensor*>& params);

std::string loss_curve_csv(const std::vector<LossReport>& curve);

}  // namespace synthvqa

#endif
