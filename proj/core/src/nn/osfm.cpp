#include "statelab/nn/osfm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "statelab/error.hpp"

namespace statelab::nn {

MinMaxScaler MinMaxScaler::fit(std::span<const double> values) {
  if (values.empty()) throw ValidationError("MinMaxScaler: no values");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  MinMaxScaler s{*lo, *hi};
  if (s.hi - s.lo < 1e-12) s.hi = s.lo + 1.0;
  return s;
}

double MinMaxScaler::transform(double v) const { return (v - lo) / (hi - lo); }
double MinMaxScaler::inverse(double v) const { return lo + v * (hi - lo); }

FeatureScaler FeatureScaler::fit(const Eigen::MatrixXd& x) {
  if (x.cols() == 0) throw ValidationError("FeatureScaler: no samples");
  FeatureScaler s;
  s.mean = x.rowwise().mean();
  s.scale = ((x.colwise() - s.mean).array().square().rowwise().mean()).sqrt().matrix();
  for (Eigen::Index i = 0; i < s.scale.size(); ++i) {
    if (!(s.scale(i) > 1e-8)) s.scale(i) = 1.0;
  }
  return s;
}

void FeatureScaler::apply(Eigen::MatrixXd& x) const {
  if (empty()) return;
  if (x.rows() != mean.size()) throw ValidationError("FeatureScaler: feature count mismatch");
  x = ((x.colwise() - mean).array().colwise() / scale.array()).matrix();
}

bool FeatureScaler::operator==(const FeatureScaler& o) const {
  if (mean.size() != o.mean.size() || scale.size() != o.scale.size()) return false;
  return empty() || (mean == o.mean && scale == o.scale);
}

Eigen::Vector2d encode_setting(const HomodyneSetting& setting, int num_modes) {
  setting.validate(num_modes);
  return {static_cast<double>(setting.mode) / num_modes, setting.phase / std::numbers::pi};
}

RecordBatch to_record_batch(std::span<const HomodyneRecord> records, int num_modes) {
  RecordBatch b;
  const auto n = static_cast<Eigen::Index>(records.size());
  b.settings.resize(kSettingDim, n);
  b.histograms.resize(kHistogramBins, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    b.settings.col(j) = encode_setting(records[j].setting, num_modes);
    for (int k = 0; k < kHistogramBins; ++k) b.histograms(k, j) = records[j].histogram.bins[k];
  }
  return b;
}

OsfmModel OsfmModel::create(const ModelDims& d, std::uint64_t seed) {
  Rng rng(seed);
  OsfmModel m;
  m.dims = d;
  m.enc_setting = Mlp({kSettingDim, d.setting_hidden}, Activation::kRelu, rng);
  m.enc_hist = Mlp({d.bins, d.hist_hidden}, Activation::kRelu, rng);
  m.enc_trunk = Mlp({d.setting_hidden + d.hist_hidden, d.trunk_hidden, d.z_dim}, Activation::kLinear, rng);
  m.prior = Mlp({d.z_dim + kSettingDim, d.latent_hidden, 2 * d.latent_dim}, Activation::kLinear, rng);
  m.posterior =
      Mlp({d.z_dim + kSettingDim + d.bins, d.latent_hidden, 2 * d.latent_dim}, Activation::kLinear, rng);
  m.decoder = Mlp({d.z_dim + kSettingDim + d.latent_dim, d.decoder_hidden, d.decoder_hidden, d.bins},
                  Activation::kLinear, rng);
  return m;
}

OsfmModel OsfmModel::zeros_like() const {
  OsfmModel g;
  g.dims = dims;
  g.enc_setting = enc_setting.zeros_like();
  g.enc_hist = enc_hist.zeros_like();
  g.enc_trunk = enc_trunk.zeros_like();
  g.prior = prior.zeros_like();
  g.posterior = posterior.zeros_like();
  g.decoder = decoder.zeros_like();
  for (const auto& [task, head] : heads) {
    TaskHead h = head;
    h.net = head.net.zeros_like();
    g.heads.emplace(task, std::move(h));
  }
  return g;
}

std::vector<ParamRef> OsfmModel::encoder_parameters() {
  std::vector<ParamRef> out;
  enc_setting.append_parameters("enc_setting", out);
  enc_hist.append_parameters("enc_hist", out);
  enc_trunk.append_parameters("enc_trunk", out);
  return out;
}

std::vector<ParamRef> OsfmModel::generator_parameters() {
  std::vector<ParamRef> out;
  prior.append_parameters("prior", out);
  posterior.append_parameters("posterior", out);
  decoder.append_parameters("decoder", out);
  return out;
}

std::vector<ParamRef> OsfmModel::pretrain_parameters() {
  auto out = encoder_parameters();
  auto gen = generator_parameters();
  out.insert(out.end(), gen.begin(), gen.end());
  return out;
}

std::vector<ParamRef> OsfmModel::head_parameters(const std::string& task) {
  auto it = heads.find(task);
  if (it == heads.end()) throw ValidationError("no head for task '" + task + "'");
  std::vector<ParamRef> out;
  it->second.net.append_parameters("head." + task, out);
  return out;
}

std::vector<ParamRef> OsfmModel::all_parameters() {
  auto out = pretrain_parameters();
  for (auto& [task, head] : heads) head.net.append_parameters("head." + task, out);
  return out;
}

EncoderPass encode_sets(const OsfmModel& model, std::span<const RecordBatch* const> sets) {
  EncoderPass pass;
  pass.offsets.push_back(0);
  for (const RecordBatch* s : sets) {
    if (s->size() == 0) throw ValidationError("encode_representation: empty record list");
    if (s->histograms.cols() != s->size() || s->settings.rows() != kSettingDim) {
      throw ValidationError("encode_representation: malformed record batch");
    }
    pass.offsets.push_back(pass.offsets.back() + s->size());
  }
  const Eigen::Index n = pass.offsets.back();
  Eigen::MatrixXd settings(kSettingDim, n);
  Eigen::MatrixXd hists(model.dims.bins, n);
  for (std::size_t k = 0; k < sets.size(); ++k) {
    const Eigen::Index len = sets[k]->size();
    settings.middleCols(pass.offsets[k], len) = sets[k]->settings;
    hists.middleCols(pass.offsets[k], len) = sets[k]->histograms;
  }
  const Eigen::MatrixXd s = model.enc_setting.forward(settings, pass.setting_cache);
  const Eigen::MatrixXd h = model.enc_hist.forward(hists, pass.hist_cache);
  Eigen::MatrixXd joint(s.rows() + h.rows(), n);
  joint.topRows(s.rows()) = s;
  joint.bottomRows(h.rows()) = h;
  const Eigen::MatrixXd e = model.enc_trunk.forward(joint, pass.trunk_cache);
  pass.z.resize(e.rows(), static_cast<Eigen::Index>(sets.size()));
  for (std::size_t k = 0; k < sets.size(); ++k) {
    const Eigen::Index len = pass.offsets[k + 1] - pass.offsets[k];
    pass.z.col(k) = e.middleCols(pass.offsets[k], len).rowwise().sum() / static_cast<double>(len);
  }
  return pass;
}

void encode_sets_backward(const OsfmModel& model, const EncoderPass& pass, const Eigen::MatrixXd& dz,
                          OsfmModel& grads) {
  const Eigen::Index n = pass.offsets.back();
  Eigen::MatrixXd de(dz.rows(), n);
  for (Eigen::Index k = 0; k < dz.cols(); ++k) {
    const Eigen::Index len = pass.offsets[k + 1] - pass.offsets[k];
    de.middleCols(pass.offsets[k], len) = dz.col(k).replicate(1, len) / static_cast<double>(len);
  }
  const Eigen::MatrixXd djoint = model.enc_trunk.backward(pass.trunk_cache, de, grads.enc_trunk);
  const Eigen::Index sh = model.enc_setting.output_dim();
  model.enc_setting.backward(pass.setting_cache, djoint.topRows(sh), grads.enc_setting);
  model.enc_hist.backward(pass.hist_cache, djoint.bottomRows(djoint.rows() - sh), grads.enc_hist);
}

Eigen::VectorXd encode_representation(const OsfmModel& model, const RecordBatch& records) {
  const RecordBatch* sets[1] = {&records};
  return encode_sets(model, sets).z.col(0);
}

Eigen::VectorXd encode_representation(const OsfmModel& model, std::span<const HomodyneRecord> records,
                                      int num_modes) {
  if (records.empty()) throw ValidationError("encode_representation: empty record list");
  return encode_representation(model, to_record_batch(records, num_modes));
}

namespace {

void softmax_columns(Eigen::MatrixXd& logits) {
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    auto col = logits.col(j);
    col.array() -= col.maxCoeff();
    col = col.array().exp().matrix();
    col /= col.sum();
  }
}

}  // namespace

Eigen::VectorXd generate_distribution(const OsfmModel& model, const Eigen::VectorXd& z,
                                      const Eigen::Vector2d& setting, GenerateMode mode, Rng* rng) {
  const int h = model.dims.latent_dim;
  Eigen::VectorXd prior_in(z.size() + kSettingDim);
  prior_in << z, setting;
  const Eigen::VectorXd stats = model.prior.forward(prior_in);
  Eigen::VectorXd latent = stats.head(h);
  if (mode == GenerateMode::kSample) {
    if (rng == nullptr) throw ValidationError("generate_marginal: sampling needs an rng");
    for (int i = 0; i < h; ++i) latent(i) += std::exp(0.5 * stats(h + i)) * rng->normal();
  }
  Eigen::VectorXd dec_in(z.size() + kSettingDim + h);
  dec_in << z, setting, latent;
  Eigen::MatrixXd out = model.decoder.forward(dec_in);
  softmax_columns(out);
  return out.col(0);
}

Histogram generate_marginal(const OsfmModel& model, const Eigen::VectorXd& z, const HomodyneSetting& setting,
                            int num_modes, GenerateMode mode, Rng* rng) {
  if (model.dims.bins != kHistogramBins) throw ValidationError("generate_marginal: model bin count is not 50");
  const Eigen::VectorXd p = generate_distribution(model, z, encode_setting(setting, num_modes), mode, rng);
  Histogram out;
  for (int k = 0; k < kHistogramBins; ++k) out.bins[k] = p(k);
  return out;
}

double triplet_loss(const Eigen::VectorXd& za, const Eigen::VectorXd& zp, const Eigen::VectorXd& zn,
                    double margin) {
  if (za.size() != zp.size() || za.size() != zn.size()) throw ValidationError("triplet_loss: dimension mismatch");
  return std::max(0.0, (za - zp).squaredNorm() - (za - zn).squaredNorm() + margin);
}

std::vector<Triplet> mine_hard_triplets(const Eigen::MatrixXd& z, std::span<const int> labels) {
  const auto n = static_cast<int>(z.cols());
  if (static_cast<int>(labels.size()) != n) throw ValidationError("mine_hard_triplets: label count mismatch");
  std::vector<Triplet> out;
  for (int a = 0; a < n; ++a) {
    int pos = -1;
    int neg = -1;
    double far = -1.0;
    double near = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
      if (j == a) continue;
      const double d = (z.col(a) - z.col(j)).squaredNorm();
      if (labels[j] == labels[a]) {
        if (d > far) {
          far = d;
          pos = j;
        }
      } else if (d < near) {
        near = d;
        neg = j;
      }
    }
    if (pos >= 0 && neg >= 0) out.push_back({a, pos, neg});
  }
  return out;
}

double triplet_weight(const TrainConfig& config, std::int64_t step, std::int64_t total_steps) {
  if (total_steps <= 1) return config.triplet_weight_max;
  const double t = static_cast<double>(std::clamp<std::int64_t>(step, 0, total_steps - 1)) /
                   static_cast<double>(total_steps - 1);
  return config.triplet_weight_max * t;
}

LossBreakdown pretrain_objective(const OsfmModel& model, std::span<const PretrainItem> items,
                                 const LossWeights& weights, double margin, const Eigen::MatrixXd& noise,
                                 OsfmModel* grads) {
  if (items.empty()) throw ValidationError("pretrain_objective: empty batch");
  const ModelDims& d = model.dims;
  const int h = d.latent_dim;
  std::vector<const RecordBatch*> contexts;
  for (const auto& it : items) contexts.push_back(&it.context);
  const EncoderPass pass = encode_sets(model, contexts);
  const auto r = static_cast<Eigen::Index>(items.size());

  // Query-level inputs.
  std::vector<Eigen::Index> qoff{0};
  for (const auto& it : items) qoff.push_back(qoff.back() + it.query.size());
  const Eigen::Index nq = qoff.back();
  if (noise.rows() != h || noise.cols() != nq) throw ValidationError("pretrain_objective: noise shape mismatch");

  LossBreakdown out;
  Eigen::MatrixXd dz = Eigen::MatrixXd::Zero(d.z_dim, r);

  if (nq > 0) {
    Eigen::MatrixXd zq(d.z_dim, nq);
    Eigen::MatrixXd sq(kSettingDim, nq);
    Eigen::MatrixXd pq(d.bins, nq);
    for (Eigen::Index k = 0; k < r; ++k) {
      const Eigen::Index len = qoff[k + 1] - qoff[k];
      zq.middleCols(qoff[k], len) = pass.z.col(k).replicate(1, len);
      sq.middleCols(qoff[k], len) = items[k].query.settings;
      pq.middleCols(qoff[k], len) = items[k].query.histograms;
    }
    Eigen::MatrixXd prior_in(d.z_dim + kSettingDim, nq);
    prior_in << zq, sq;
    Eigen::MatrixXd post_in(d.z_dim + kSettingDim + d.bins, nq);
    post_in << zq, sq, pq;
    Mlp::Cache prior_cache, post_cache, dec_cache;
    const Eigen::MatrixXd ps = model.prior.forward(prior_in, prior_cache);
    const Eigen::MatrixXd qs = model.posterior.forward(post_in, post_cache);
    const Eigen::MatrixXd mu_p = ps.topRows(h), lv_p = ps.bottomRows(h);
    const Eigen::MatrixXd mu_q = qs.topRows(h), lv_q = qs.bottomRows(h);
    const Eigen::MatrixXd sd_q = (0.5 * lv_q.array()).exp().matrix();
    const Eigen::MatrixXd latent = mu_q + sd_q.cwiseProduct(noise);
    Eigen::MatrixXd dec_in(d.z_dim + kSettingDim + h, nq);
    dec_in << zq, sq, latent;
    Eigen::MatrixXd prob = model.decoder.forward(dec_in, dec_cache);
    softmax_columns(prob);

    const double inv = 1.0 / static_cast<double>(nq);
    // Cross-entropy -sum P log Q with a floor on Q for the reported value.
    out.recon = -(pq.array() * (prob.array().max(1e-300)).log()).sum() * inv;
    const Eigen::ArrayXXd diff = (mu_q - mu_p).array();
    const Eigen::ArrayXXd inv_var_p = (-lv_p.array()).exp();
    const Eigen::ArrayXXd var_q = lv_q.array().exp();
    out.kl = 0.5 * (lv_p.array() - lv_q.array() + (var_q + diff.square()) * inv_var_p - 1.0).sum() * inv;

    if (grads != nullptr && (weights.recon != 0.0 || weights.kl != 0.0)) {
      // Decoder path: dCE/dlogits = (Q - P) / nq.
      const Eigen::MatrixXd dlogits = weights.recon * inv * (prob - pq);
      Eigen::MatrixXd ddec = model.decoder.backward(dec_cache, dlogits, grads->decoder);
      const Eigen::MatrixXd dlatent = ddec.bottomRows(h);
      Eigen::MatrixXd dmu_q = dlatent;
      Eigen::MatrixXd dlv_q = (dlatent.array() * 0.5 * sd_q.array() * noise.array()).matrix();
      Eigen::MatrixXd dmu_p = Eigen::MatrixXd::Zero(h, nq);
      Eigen::MatrixXd dlv_p = Eigen::MatrixXd::Zero(h, nq);
      if (weights.kl != 0.0) {
        const double w = weights.kl * inv;
        dmu_q.array() += w * diff * inv_var_p;
        dmu_p.array() -= w * diff * inv_var_p;
        dlv_q.array() += w * 0.5 * (var_q * inv_var_p - 1.0);
        dlv_p.array() += w * 0.5 * (1.0 - (var_q + diff.square()) * inv_var_p);
      }
      Eigen::MatrixXd dps(2 * h, nq);
      dps << dmu_p, dlv_p;
      Eigen::MatrixXd dqs(2 * h, nq);
      dqs << dmu_q, dlv_q;
      const Eigen::MatrixXd dprior_in = model.prior.backward(prior_cache, dps, grads->prior);
      const Eigen::MatrixXd dpost_in = model.posterior.backward(post_cache, dqs, grads->posterior);
      const Eigen::MatrixXd dzq =
          ddec.topRows(d.z_dim) + dprior_in.topRows(d.z_dim) + dpost_in.topRows(d.z_dim);
      for (Eigen::Index k = 0; k < r; ++k) {
        dz.col(k) += dzq.middleCols(qoff[k], qoff[k + 1] - qoff[k]).rowwise().sum();
      }
    }
  }

  std::vector<int> labels;
  for (const auto& it : items) labels.push_back(it.state);
  const std::vector<Triplet> triplets = mine_hard_triplets(pass.z, labels);
  if (!triplets.empty()) {
    const double inv = 1.0 / static_cast<double>(triplets.size());
    for (const Triplet& t : triplets) {
      const double l = triplet_loss(pass.z.col(t.anchor), pass.z.col(t.positive), pass.z.col(t.negative), margin);
      out.triplet += l * inv;
      if (grads != nullptr && weights.triplet != 0.0 && l > 0.0) {
        const double w = weights.triplet * inv;
        const Eigen::VectorXd za = pass.z.col(t.anchor);
        const Eigen::VectorXd zp = pass.z.col(t.positive);
        const Eigen::VectorXd zn = pass.z.col(t.negative);
        dz.col(t.anchor) += w * 2.0 * (zn - zp);
        dz.col(t.positive) += w * -2.0 * (za - zp);
        dz.col(t.negative) += w * 2.0 * (za - zn);
      }
    }
  }
  out.triplet_weight = weights.triplet;
  out.total = weights.recon * out.recon + weights.kl * out.kl + weights.triplet * out.triplet;
  if (grads != nullptr) encode_sets_backward(model, pass, dz, *grads);
  return out;
}

std::vector<PretrainItem> sample_pretrain_items(std::span<const PretrainSample> data, std::span<const int> states,
                                                const TrainConfig& config, Rng& rng) {
  std::vector<PretrainItem> items;
  for (int s : states) {
    const PretrainSample& sample = data[s];
    for (int k = 0; k < config.subsets_per_state; ++k) {
      const MeasurementPlan plan = sample_measurement_plan(sample.num_modes, Stage::kPretrain, rng.engine()());
      if (plan.all.size() != sample.records.size()) {
        throw ValidationError("pretrain sample " + std::to_string(s) + " does not carry the full measurement table");
      }
      std::vector<HomodyneRecord> ctx;
      for (int i : plan.context) ctx.push_back(sample.records[i]);
      std::vector<int> query = plan.query;
      std::shuffle(query.begin(), query.end(), rng.engine());
      query.resize(std::min<std::size_t>(query.size(), config.queries_per_subset));
      std::vector<HomodyneRecord> q;
      for (int i : query) q.push_back(sample.records[i]);
      items.push_back({s, to_record_batch(ctx, sample.num_modes), to_record_batch(q, sample.num_modes)});
    }
  }
  return items;
}

LossBreakdown pretrain_step(OsfmModel& model, AdamState& adam, std::span<const PretrainItem> items,
                            const TrainConfig& config, double lambda, Rng& rng) {
  Eigen::Index nq = 0;
  for (const auto& it : items) nq += it.query.size();
  Eigen::MatrixXd noise(model.dims.latent_dim, nq);
  for (Eigen::Index j = 0; j < nq; ++j)
    for (Eigen::Index i = 0; i < noise.rows(); ++i) noise(i, j) = rng.normal();
  OsfmModel grads = model.zeros_like();
  const LossBreakdown loss =
      pretrain_objective(model, items, {1.0, config.kl_weight, lambda}, config.margin, noise, &grads);
  if (!std::isfinite(loss.total)) {
    throw NumericalError("pretrain: non-finite loss (recon " + std::to_string(loss.recon) + ", kl " +
                         std::to_string(loss.kl) + ", triplet " + std::to_string(loss.triplet) + ", step " +
                         std::to_string(adam.step) + ")");
  }
  adam_step(model.pretrain_parameters(), grads.pretrain_parameters(), adam, config.adam);
  return loss;
}

std::vector<EpochLog> pretrain(OsfmModel& model, AdamState& adam, std::span<const PretrainSample> data,
                               const TrainConfig& config, int first_epoch,
                               const std::function<void(const EpochLog&)>& on_epoch) {
  if (data.size() < 2) throw ValidationError("pretrain: need at least two states");
  if (config.batch_states < 2 || config.subsets_per_state < 2) {
    throw ValidationError("pretrain: batch_states and subsets_per_state must be >= 2");
  }
  const auto n = static_cast<std::int64_t>(data.size());
  const std::int64_t steps_per_epoch = (n + config.batch_states - 1) / config.batch_states;
  const std::int64_t total = steps_per_epoch * config.epochs;
  std::vector<EpochLog> logs;
  for (int epoch = first_epoch; epoch < config.epochs; ++epoch) {
    Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    std::vector<int> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng.engine());
    EpochLog log;
    log.epoch = epoch;
    for (std::int64_t b = 0; b < steps_per_epoch; ++b) {
      const auto lo = static_cast<std::size_t>(b * config.batch_states);
      const auto hi = std::min(order.size(), lo + config.batch_states);
      std::span<const int> states(order.data() + lo, hi - lo);
      const double lambda = triplet_weight(config, epoch * steps_per_epoch + b, total);
      const auto items = sample_pretrain_items(data, states, config, rng);
      const LossBreakdown l = pretrain_step(model, adam, items, config, lambda, rng);
      log.recon += l.recon / steps_per_epoch;
      log.kl += l.kl / steps_per_epoch;
      log.triplet += l.triplet / steps_per_epoch;
      log.total += l.total / steps_per_epoch;
      if (b == 0) log.lambda_start = lambda;
      log.lambda_end = lambda;
    }
    logs.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return logs;
}

}  // namespace statelab::nn
