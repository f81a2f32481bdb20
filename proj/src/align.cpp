#include "synthvqa/align.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "synthvqa/rng.hpp"

namespace synthvqa {

// ---------------------------------------------------------------------------
// MMD

double median_heuristic_bandwidth(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  Eigen::MatrixXd pooled(x.rows() + y.rows(), x.cols());
  pooled << x, y;
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(pooled.rows()) * (pooled.rows() - 1) / 2);
  for (int i = 0; i < pooled.rows(); ++i)
    for (int j = i + 1; j < pooled.rows(); ++j)
      dists.push_back((pooled.row(i) - pooled.row(j)).norm());
  if (dists.empty()) return 1.0;
  const std::size_t mid = dists.size() / 2;
  std::nth_element(dists.begin(), dists.begin() + mid, dists.end());
  const double med = dists[mid];
  return med > 0.0 ? med : 1.0;
}

namespace {

// Mean RBF kernel value over all ordered pairs (V-statistic, diagonal kept).
double mean_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double sigma) {
  const double inv = 1.0 / (2.0 * sigma * sigma);
  double sum = 0.0;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < b.rows(); ++j)
      sum += std::exp(-(a.row(i) - b.row(j)).squaredNorm() * inv);
  return sum / (static_cast<double>(a.rows()) * b.rows());
}

}  // namespace

double mmd(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const KernelConfig& k) {
  if (x.rows() == 0 || y.rows() == 0) throw std::invalid_argument("mmd: empty sample");
  if (x.cols() != y.cols()) throw std::invalid_argument("mmd: sample dims differ");
  const double sigma = k.bandwidth > 0.0 ? k.bandwidth : median_heuristic_bandwidth(x, y);
  return mean_kernel(x, x, sigma) + mean_kernel(y, y, sigma) - 2.0 * mean_kernel(x, y, sigma);
}

MmdWithGrad mmd_with_grad(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double bandwidth) {
  if (x.cols() != y.cols()) throw std::invalid_argument("mmd: sample dims differ");
  const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
  const double inv_sq = 1.0 / (bandwidth * bandwidth);
  const int n = static_cast<int>(x.rows()), m = static_cast<int>(y.rows());

  MmdWithGrad out;
  out.dx = Eigen::MatrixXd::Zero(n, x.cols());
  out.dy = Eigen::MatrixXd::Zero(m, y.cols());

  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const Eigen::RowVectorXd d = x.row(j) - x.row(i);
      const double kk = std::exp(-d.squaredNorm() * inv);
      sxx += kk;
      out.dx.row(i) += (2.0 / (static_cast<double>(n) * n)) * kk * inv_sq * d;
    }
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      const Eigen::RowVectorXd d = y.row(j) - y.row(i);
      const double kk = std::exp(-d.squaredNorm() * inv);
      syy += kk;
      out.dy.row(i) += (2.0 / (static_cast<double>(m) * m)) * kk * inv_sq * d;
    }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) {
      const Eigen::RowVectorXd d = y.row(j) - x.row(i);
      const double kk = std::exp(-d.squaredNorm() * inv);
      sxy += kk;
      out.dx.row(i) -= (2.0 / (static_cast<double>(n) * m)) * kk * inv_sq * d;
      out.dy.row(j) -= (2.0 / (static_cast<double>(n) * m)) * kk * inv_sq * (-d);
    }
  out.value = sxx / (static_cast<double>(n) * n) + syy / (static_cast<double>(m) * m) -
              2.0 * sxy / (static_cast<double>(n) * m);
  return out;
}

// ---------------------------------------------------------------------------
// Layers / optimizer

void Tensor::init(const std::string& n, int rows, int cols, Rng& rng, double scale) {
  name = n;
  value.resize(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) value(r, c) = scale * rng.uniform_double(-1.0, 1.0);
  grad.setZero(rows, cols);
  adam_m.setZero(rows, cols);
  adam_v.setZero(rows, cols);
}

void Adam::step(const std::vector<Tensor*>& params) {
  ++step_count;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_count));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_count));
  for (Tensor* t : params) {
    const Eigen::MatrixXd g = t->grad + cfg.weight_decay * t->value;
    t->adam_m = cfg.beta1 * t->adam_m + (1.0 - cfg.beta1) * g;
    t->adam_v = cfg.beta2 * t->adam_v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    const Eigen::MatrixXd m_hat = t->adam_m / bc1;
    const Eigen::MatrixXd v_hat = t->adam_v / bc2;
    t->value.array() -= cfg.lr * m_hat.array() / (v_hat.array().sqrt() + cfg.eps);
  }
}

void Dense::init(const std::string& name, int in, int out, Rng& rng) {
  const double scale = std::sqrt(6.0 / (in + out));
  w.init(name + ".w", out, in, rng, scale);
  b.init(name + ".b", out, 1, rng, 0.0);
}

Eigen::MatrixXd Dense::forward(const Eigen::MatrixXd& x) const {
  return (x * w.value.transpose()).rowwise() + b.value.col(0).transpose();
}

Eigen::MatrixXd Dense::backward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& dy) {
  w.grad += dy.transpose() * x;
  b.grad.col(0) += dy.colwise().sum().transpose();
  return dy * w.value;
}

void Mlp::init(const std::string& name, int in, int hidden, int out, Rng& rng) {
  first.init(name + ".first", in, hidden, rng);
  second.init(name + ".second", hidden, out, rng);
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, Cache* cache) const {
  const Eigen::MatrixXd pre = first.forward(x);
  const Eigen::MatrixXd hidden = pre.cwiseMax(0.0);
  if (cache) {
    cache->input = x;
    cache->pre = pre;
    cache->hidden = hidden;
  }
  return second.forward(hidden);
}

Eigen::MatrixXd Mlp::backward(const Cache& cache, const Eigen::MatrixXd& dy) {
  const Eigen::MatrixXd dh = second.backward(cache.hidden, dy);
  const Eigen::MatrixXd dpre =
      dh.cwiseProduct((cache.pre.array() > 0.0).cast<double>().matrix());
  return first.backward(cache.input, dpre);
}

std::vector<Tensor*> Mlp::params() { return {&first.w, &first.b, &second.w, &second.b}; }

void Autoencoder::init(const std::string& name, int dim, int hidden, Rng& rng) {
  encoder.init(name + ".enc", dim, hidden, hidden, rng);
  decoder.init(name + ".dec", hidden, hidden, dim, rng);
}

std::vector<Tensor*> Autoencoder::params() {
  auto p = encoder.params();
  for (Tensor* t : decoder.params()) p.push_back(t);
  return p;
}

void AutoencoderPair::init(int dim, int hidden, Rng& rng) {
  primary.init("primary", dim, hidden, rng);
  twin.init("twin", dim, hidden, rng);
  domain_head.init("domain_head", hidden, 1, rng);
}

std::vector<Tensor*> AutoencoderPair::params() {
  auto p = primary.params();
  for (Tensor* t : twin.params()) p.push_back(t);
  for (Tensor* t : domain_head.params()) p.push_back(t);
  return p;
}

void MmdAlignModel::init(int dim, int hidden, Rng& rng) {
  real.init("real", dim, hidden, rng);
  if (has_w) synth_w.init("synth_w", dim, hidden, rng);
  if (has_h) synth_h.init("synth_h", dim, hidden, rng);
}

std::vector<Tensor*> MmdAlignModel::params() {
  auto p = real.params();
  if (has_w)
    for (Tensor* t : synth_w.params()) p.push_back(t);
  if (has_h)
    for (Tensor* t : synth_h.params()) p.push_back(t);
  return p;
}

// ---------------------------------------------------------------------------
// Adversarial training

double alpha_schedule(double p) {
  if (p < 0.0 || p > 1.0) throw std::domain_error("alpha_schedule: p outside [0, 1]");
  return 2.0 / (1.0 + std::exp(-10.0 * p)) - 1.0;
}

namespace {

double softplus(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

void zero_grads(const std::vector<Tensor*>& params) {
  for (Tensor* t : params) t->zero_grad();
}

void check_finite(const LossReport& report, const char* what) {
  if (!std::isfinite(report.l_r))
    throw DivergenceError(std::string(what) + ": reconstruction loss is non-finite");
  if (!std::isfinite(report.l_d))
    throw DivergenceError(std::string(what) + ": domain loss is non-finite");
  if (!std::isfinite(report.l_dw) || !std::isfinite(report.l_dh))
    throw DivergenceError(std::string(what) + ": MMD term is non-finite");
  if (!std::isfinite(report.l_total))
    throw DivergenceError(std::string(what) + ": total loss is non-finite");
}

struct GrlForward {
  Mlp::Cache enc_r, dec_r, enc_s, dec_s;
  Eigen::MatrixXd z_r, z_s, rec_r, rec_s, logit_r, logit_s;
  LossReport report;
};

GrlForward grl_forward(const Eigen::MatrixXd& xr, const Eigen::MatrixXd& xs,
                       AutoencoderPair& model, double alpha) {
  GrlForward f;
  f.z_r = model.primary.encoder.forward(xr, &f.enc_r);
  f.rec_r = model.primary.decoder.forward(f.z_r, &f.dec_r);
  f.z_s = model.twin.encoder.forward(xs, &f.enc_s);
  f.rec_s = model.twin.decoder.forward(f.z_s, &f.dec_s);
  f.logit_r = model.domain_head.forward(f.z_r);
  f.logit_s = model.domain_head.forward(f.z_s);

  const double nr = static_cast<double>(xr.rows());
  const double ns = static_cast<double>(xs.rows());
  f.report.l_r = (f.rec_r - xr).squaredNorm() / nr + (f.rec_s - xs).squaredNorm() / ns;
  double ld = 0.0;
  for (int i = 0; i < f.logit_r.rows(); ++i) ld += softplus(-f.logit_r(i, 0)) / nr;
  for (int i = 0; i < f.logit_s.rows(); ++i) ld += softplus(f.logit_s(i, 0)) / ns;
  f.report.l_d = ld;
  f.report.l_total = f.report.l_r + alpha * f.report.l_d;
  return f;
}

// Backward for the adversarial objective. The domain loss reaches the head
// with weight alpha and crosses into the encoders scaled by reversal_scale
// (training: -alpha; gradient checks: +alpha, which makes the full gradient
// the exact gradient of l_total).
void grl_backward(const Eigen::MatrixXd& xr, const Eigen::MatrixXd& xs, AutoencoderPair& model,
                  GrlForward& f, double alpha, double reversal_scale) {
  const double nr = static_cast<double>(xr.rows());
  const double ns = static_cast<double>(xs.rows());

  // Domain path first, unscaled, so the encoder share can be rescaled exactly.
  Eigen::MatrixXd dlogit_r(f.logit_r.rows(), 1), dlogit_s(f.logit_s.rows(), 1);
  for (int i = 0; i < f.logit_r.rows(); ++i)
    dlogit_r(i, 0) = (1.0 / (1.0 + std::exp(-f.logit_r(i, 0))) - 1.0) / nr;
  for (int i = 0; i < f.logit_s.rows(); ++i)
    dlogit_s(i, 0) = (1.0 / (1.0 + std::exp(-f.logit_s(i, 0)))) / ns;

  const Eigen::MatrixXd dz_r_dom = model.domain_head.backward(f.z_r, dlogit_r);
  const Eigen::MatrixXd dz_s_dom = model.domain_head.backward(f.z_s, dlogit_s);
  for (Tensor* t : model.domain_head.params()) t->grad *= alpha;

  model.primary.encoder.backward(f.enc_r, dz_r_dom);
  model.twin.encoder.backward(f.enc_s, dz_s_dom);
  for (Tensor* t : model.primary.encoder.params()) t->grad *= reversal_scale;
  for (Tensor* t : model.twin.encoder.params()) t->grad *= reversal_scale;

  // Reconstruction path.
  const Eigen::MatrixXd drec_r = 2.0 * (f.rec_r - xr) / nr;
  const Eigen::MatrixXd drec_s = 2.0 * (f.rec_s - xs) / ns;
  const Eigen::MatrixXd dz_r_rec = model.primary.decoder.backward(f.dec_r, drec_r);
  const Eigen::MatrixXd dz_s_rec = model.twin.decoder.backward(f.dec_s, drec_s);
  model.primary.encoder.backward(f.enc_r, dz_r_rec);
  model.twin.encoder.backward(f.enc_s, dz_s_rec);
}

}  // namespace

LossReport grl_train_step(const Eigen::MatrixXd& batch_r, const Eigen::MatrixXd& batch_s,
                          AutoencoderPair& model, AlignConfig& cfg, Adam& opt, double p) {
  const double alpha = cfg.use_alpha_schedule ? alpha_schedule(p) : cfg.alpha;
  const auto params = model.params();
  zero_grads(params);
  GrlForward f = grl_forward(batch_r, batch_s, model, alpha);
  check_finite(f.report, "grl_train_step");
  grl_backward(batch_r, batch_s, model, f, alpha, -alpha);
  opt.step(params);
  return f.report;
}

std::vector<Eigen::MatrixXd> grl_encoder_domain_gradient(const Eigen::MatrixXd& batch_r,
                                                         const Eigen::MatrixXd& batch_s,
                                                         AutoencoderPair& model,
                                                         double reversal_scale) {
  const auto params = model.params();
  zero_grads(params);
  GrlForward f = grl_forward(batch_r, batch_s, model, 1.0);

  const double nr = static_cast<double>(batch_r.rows());
  const double ns = static_cast<double>(batch_s.rows());
  Eigen::MatrixXd dlogit_r(f.logit_r.rows(), 1), dlogit_s(f.logit_s.rows(), 1);
  for (int i = 0; i < f.logit_r.rows(); ++i)
    dlogit_r(i, 0) = (1.0 / (1.0 + std::exp(-f.logit_r(i, 0))) - 1.0) / nr;
  for (int i = 0; i < f.logit_s.rows(); ++i)
    dlogit_s(i, 0) = (1.0 / (1.0 + std::exp(-f.logit_s(i, 0)))) / ns;
  const Eigen::MatrixXd dz_r = model.domain_head.backward(f.z_r, dlogit_r);
  const Eigen::MatrixXd dz_s = model.domain_head.backward(f.z_s, dlogit_s);
  model.primary.encoder.backward(f.enc_r, dz_r);
  model.twin.encoder.backward(f.enc_s, dz_s);

  std::vector<Eigen::MatrixXd> out;
  for (Tensor* t : model.primary.encoder.params()) out.push_back(reversal_scale * t->grad);
  for (Tensor* t : model.twin.encoder.params()) out.push_back(reversal_scale * t->grad);
  return out;
}

// ---------------------------------------------------------------------------
// MMD alignment training

namespace {

double recon_pass(Autoencoder& ae, const Eigen::MatrixXd& x, Mlp::Cache& enc_cache,
                  Mlp::Cache& dec_cache, Eigen::MatrixXd& z, Eigen::MatrixXd& rec) {
  z = ae.encoder.forward(x, &enc_cache);
  rec = ae.decoder.forward(z, &dec_cache);
  return (rec - x).squaredNorm() / static_cast<double>(x.rows());
}

}  // namespace

LossReport mmd_align_train_step(const Eigen::MatrixXd& batch_r, const Eigen::MatrixXd& batch_w,
                                const Eigen::MatrixXd& batch_h, MmdAlignModel& model,
                                AlignConfig& cfg, Adam& opt) {
  const bool use_w = model.has_w && batch_w.rows() > 0;
  const bool use_h = model.has_h && batch_h.rows() > 0;
  if (batch_r.rows() == 0) throw std::invalid_argument("mmd_align_train_step: empty real batch");

  const auto params = model.params();
  zero_grads(params);

  LossReport rep;
  Mlp::Cache er, dr, ew, dw, eh, dh;
  Eigen::MatrixXd zr, rec_r, zw, rec_w, zh, rec_h;
  rep.l_r = recon_pass(model.real, batch_r, er, dr, zr, rec_r);
  if (use_w) rep.l_r += recon_pass(model.synth_w, batch_w, ew, dw, zw, rec_w);
  if (use_h) rep.l_r += recon_pass(model.synth_h, batch_h, eh, dh, zh, rec_h);

  Eigen::MatrixXd dzr_mmd = Eigen::MatrixXd::Zero(zr.rows(), zr.cols());
  Eigen::MatrixXd dzw_mmd, dzh_mmd;
  if (use_w) {
    const double sigma =
        cfg.kernel.bandwidth > 0.0 ? cfg.kernel.bandwidth : median_heuristic_bandwidth(zr, zw);
    const MmdWithGrad g = mmd_with_grad(zr, zw, sigma);
    rep.l_dw = g.value;
    dzr_mmd += cfg.alpha * g.dx;
    dzw_mmd = cfg.alpha * g.dy;
  }
  if (use_h) {
    const double sigma =
        cfg.kernel.bandwidth > 0.0 ? cfg.kernel.bandwidth : median_heuristic_bandwidth(zr, zh);
    const MmdWithGrad g = mmd_with_grad(zr, zh, sigma);
    rep.l_dh = g.value;
    dzr_mmd += cfg.beta * g.dx;
    dzh_mmd = cfg.beta * g.dy;
  }
  rep.l_total = rep.l_r + cfg.alpha * rep.l_dw + cfg.beta * rep.l_dh;
  check_finite(rep, "mmd_align_train_step");

  const Eigen::MatrixXd drec_r = 2.0 * (rec_r - batch_r) / static_cast<double>(batch_r.rows());
  model.real.encoder.backward(er, model.real.decoder.backward(dr, drec_r) + dzr_mmd);
  if (use_w) {
    const Eigen::MatrixXd drec_w = 2.0 * (rec_w - batch_w) / static_cast<double>(batch_w.rows());
    model.synth_w.encoder.backward(ew, model.synth_w.decoder.backward(dw, drec_w) + dzw_mmd);
  }
  if (use_h) {
    const Eigen::MatrixXd drec_h = 2.0 * (rec_h - batch_h) / static_cast<double>(batch_h.rows());
    model.synth_h.encoder.backward(eh, model.synth_h.decoder.backward(dh, drec_h) + dzh_mmd);
  }

  opt.step(params);
  return rep;
}

// ---------------------------------------------------------------------------
// Gradient check

double grad_check(const std::function<double()>& loss_with_grad,
                  const std::vector<Tensor*>& params, double epsilon) {
  loss_with_grad();
  std::vector<Eigen::MatrixXd> analytic;
  analytic.reserve(params.size());
  for (const Tensor* t : params) analytic.push_back(t->grad);

  double max_rel = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Eigen::MatrixXd& v = params[p]->value;
    for (int r = 0; r < v.rows(); ++r) {
      for (int c = 0; c < v.cols(); ++c) {
        const double saved = v(r, c);
        v(r, c) = saved + epsilon;
        const double up = loss_with_grad();
        v(r, c) = saved - epsilon;
        const double down = loss_with_grad();
        v(r, c) = saved;
        const double numeric = (up - down) / (2.0 * epsilon);
        const double a = analytic[p](r, c);
        const double rel = std::abs(a - numeric) / std::max(1.0, std::abs(a) + std::abs(numeric));
        max_rel = std::max(max_rel, rel);
      }
    }
  }
  // Restore the analytic gradients for callers that inspect them afterwards.
  loss_with_grad();
  return max_rel;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

void put_u32f(std::ofstream& f, std::uint32_t v) {
  char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  f.write(buf, 4);
}

std::uint32_t get_u32f(std::ifstream& f) {
  unsigned char buf[4];
  f.read(reinterpret_cast<char*>(buf), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const std::vector<Tensor*>& params) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write checkpoint: " + path);
  f.write("SVQC", 4);
  put_u32f(f, static_cast<std::uint32_t>(params.size()));
  for (const Tensor* t : params) {
    put_u32f(f, static_cast<std::uint32_t>(t->name.size()));
    f.write(t->name.data(), static_cast<std::streamsize>(t->name.size()));
    put_u32f(f, static_cast<std::uint32_t>(t->value.rows()));
    put_u32f(f, static_cast<std::uint32_t>(t->value.cols()));
    for (int r = 0; r < t->value.rows(); ++r)
      for (int c = 0; c < t->value.cols(); ++c) {
        const double d = t->value(r, c);
        f.write(reinterpret_cast<const char*>(&d), 8);
      }
  }
}

void load_checkpoint(const std::string& path, const std::vector<Tensor*>& params) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[4];
  f.read(magic, 4);
  if (std::memcmp(magic, "SVQC", 4) != 0)
    throw std::runtime_error("bad checkpoint magic in " + path);
  const std::uint32_t count = get_u32f(f);
  if (count != params.size())
    throw std::runtime_error("checkpoint tensor count mismatch in " + path);
  for (Tensor* t : params) {
    const std::uint32_t name_len = get_u32f(f);
    std::string name(name_len, '\0');
    f.read(name.data(), name_len);
    if (name != t->name)
      throw std::runtime_error("checkpoint tensor '" + name + "' does not match '" + t->name +
                               "'");
    const std::uint32_t rows = get_u32f(f), cols = get_u32f(f);
    if (static_cast<int>(rows) != t->value.rows() || static_cast<int>(cols) != t->value.cols())
      throw std::runtime_error("checkpoint shape mismatch for '" + name + "'");
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t c = 0; c < cols; ++c) {
        double d;
        f.read(reinterpret_cast<char*>(&d), 8);
        t->value(r, c) = d;
      }
  }
}

std::string loss_curve_csv(const std::vector<LossReport>& curve) {
  std::ostringstream os;
  os << "step,l_r,l_d,l_dw,l_dh,l_total\n";
  os.precision(17);
  for (std::size_t i = 0; i < curve.size(); ++i)
    os << i << "," << curve[i].l_r << "," << curve[i].l_d << "," << curve[i].l_dw << ","
       << curve[i].l_dh << "," << curve[i].l_total << "\n";
  return os.str();
}

}  // namespace synthvqa
