#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "gradcheck.hpp"
#include "statelab/error.hpp"
#include "statelab/nn/checkpoint.hpp"
#include "statelab/nn/heads.hpp"
#include "statelab/nn/osfm.hpp"

namespace statelab::nn {
namespace {

using statelab::testing::check_finetune_term;
using statelab::testing::check_pretrain_term;
using statelab::testing::random_records;

std::vector<HomodyneRecord> random_measurements(int n, int num_modes, Rng& rng) {
  std::vector<HomodyneRecord> out;
  for (int i = 0; i < n; ++i) {
    HomodyneRecord r;
    r.setting = {rng.integer(0, num_modes - 1), grid_phase(rng.integer(0, 99))};
    double s = 0.0;
    for (double& b : r.histogram.bins) s += (b = rng.uniform());
    for (double& b : r.histogram.bins) b /= s;
    out.push_back(r);
  }
  return out;
}

TEST(Mlp, ForwardMatchesHandComputation) {
  Rng rng(1);
  Mlp net({2, 2, 1}, Activation::kLinear, rng);
  net.layers()[0].weight << 1.0, -1.0, 0.5, 2.0;
  net.layers()[0].bias << 0.0, -1.0;
  net.layers()[1].weight << 3.0, 1.0;
  net.layers()[1].bias << 0.5;
  Eigen::VectorXd x(2);
  x << 1.0, 2.0;
  // hidden = relu(-1, 3.5) = (0, 3.5); out = 3.5 + 0.5.
  EXPECT_DOUBLE_EQ(net.forward(x)(0, 0), 4.0);
  EXPECT_THROW(net.forward(Eigen::VectorXd::Zero(3)), ValidationError);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  Eigen::VectorXd p = Eigen::VectorXd::LinSpaced(4, -1.0, 1.0);
  const Eigen::VectorXd before = p;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(4);
  AdamState s;
  adam_step({{"p", p.data(), 4, 1}}, {{"g", g.data(), 4, 1}}, s, {});
  EXPECT_EQ(p, before);
}

TEST(Adam, FirstStepHasMagnitudeLr) {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(3);
  Eigen::VectorXd g(3);
  g << 0.3, -5.0, 1e-3;
  AdamState s;
  adam_step({{"p", p.data(), 3, 1}}, {{"g", g.data(), 3, 1}}, s, {});
  // m_hat = g, v_hat = g^2, so the step is -lr g / (|g| + eps).
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(p(i), -1e-3 * g(i) / (std::abs(g(i)) + 1e-8), 1e-15);
}

TEST(Adam, ConvergesOnQuadraticBowl) {
  Eigen::VectorXd p(2);
  p << 0.2, -0.15;
  Eigen::VectorXd g(2);
  AdamState s;
  AdamConfig cfg;
  for (int t = 0; t < 500; ++t) {
    g = 2.0 * p;
    adam_step({{"p", p.data(), 2, 1}}, {{"g", g.data(), 2, 1}}, s, cfg);
  }
  EXPECT_LT(p.norm(), 0.02);
}

TEST(Adam, RejectsShapeMismatch) {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(3);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(2);
  AdamState s;
  EXPECT_THROW(adam_step({{"p", p.data(), 3, 1}}, {{"g", g.data(), 2, 1}}, s, {}), ValidationError);
}

TEST(Encoder, SingleRecordGivesItsOwnEncoding) {
  const OsfmModel model = OsfmModel::create({}, 3);
  Rng rng(4);
  const auto recs = random_measurements(1, 2, rng);
  const Eigen::VectorXd z = encode_representation(model, recs, 2);
  EXPECT_EQ(z.size(), 32);
  EXPECT_THROW(encode_representation(model, std::vector<HomodyneRecord>{}, 2), ValidationError);
}

TEST(Encoder, PermutationAndDuplicationInvariant) {
  const OsfmModel model = OsfmModel::create({}, 5);
  Rng rng(6);
  auto recs = random_measurements(12, 2, rng);
  const Eigen::VectorXd z = encode_representation(model, recs, 2);
  auto perm = recs;
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  EXPECT_LT((encode_representation(model, perm, 2) - z).cwiseAbs().maxCoeff(), 1e-12);
  auto dup = recs;
  dup.insert(dup.end(), recs.begin(), recs.end());
  EXPECT_LT((encode_representation(model, dup, 2) - z).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Encoder, SettingEncodingIsModeFractionAndPhaseFraction) {
  const Eigen::Vector2d e = encode_setting({1, std::numbers::pi / 4}, 4);
  EXPECT_DOUBLE_EQ(e(0), 0.25);
  EXPECT_DOUBLE_EQ(e(1), 0.25);
}

TEST(Generator, OutputIsNormalizedAndDeterministicInMeanMode) {
  const OsfmModel model = OsfmModel::create({}, 8);
  Rng rng(9);
  const Eigen::VectorXd z = Eigen::VectorXd::Random(32);
  const Histogram a = generate_marginal(model, z, {0, 0.3}, 1);
  const Histogram b = generate_marginal(model, z, {0, 0.3}, 1);
  EXPECT_NEAR(a.sum(), 1.0, 1e-9);
  EXPECT_EQ(a.bins, b.bins);
  const Histogram s = generate_marginal(model, z, {0, 0.3}, 1, GenerateMode::kSample, &rng);
  EXPECT_NEAR(s.sum(), 1.0, 1e-9);
}

TEST(TripletLoss, UnitIdentities) {
  Eigen::VectorXd a = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd n(2);
  n << 2.0, 0.0;
  EXPECT_DOUBLE_EQ(triplet_loss(a, a, n, 1.0), 0.0);
  Eigen::VectorXd p(2);
  p << 1.0, 0.0;
  Eigen::VectorXd n1(2);
  n1 << 0.0, 1.0;
  EXPECT_DOUBLE_EQ(triplet_loss(a, p, n1, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(triplet_loss(a, p, p, 1.0), 1.0);
}

TEST(TripletMining, MatchesBruteForceOnRandomVectors) {
  Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd z(4, 9);
    for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = rng.normal();
    const std::vector<int> labels{0, 0, 0, 1, 1, 1, 2, 2, 2};
    const auto mined = mine_hard_triplets(z, labels);
    ASSERT_EQ(mined.size(), 9u);
    for (int a = 0; a < 9; ++a) {
      int best_p = -1;
      int best_n = -1;
      for (int j = 0; j < 9; ++j) {
        if (j == a) continue;
        const double d = (z.col(a) - z.col(j)).squaredNorm();
        if (labels[j] == labels[a]) {
          if (best_p < 0 || d > (z.col(a) - z.col(best_p)).squaredNorm()) best_p = j;
        } else if (best_n < 0 || d < (z.col(a) - z.col(best_n)).squaredNorm()) {
          best_n = j;
        }
      }
      EXPECT_EQ(mined[a], (Triplet{a, best_p, best_n}));
    }
  }
}

TEST(TripletMining, IdenticalEncodingsGiveMarginAndLowestIndexTies) {
  const Eigen::MatrixXd z = Eigen::MatrixXd::Ones(3, 4);
  const std::vector<int> labels{0, 0, 1, 1};
  const auto mined = mine_hard_triplets(z, labels);
  ASSERT_EQ(mined.size(), 4u);
  EXPECT_EQ(mined[0], (Triplet{0, 1, 2}));
  EXPECT_EQ(mined[2], (Triplet{2, 3, 0}));
  for (const auto& t : mined) EXPECT_DOUBLE_EQ(triplet_loss(z.col(t.anchor), z.col(t.positive), z.col(t.negative), 1.0), 1.0);
}

TEST(TripletMining, SeparatedClustersHaveZeroLoss) {
  Eigen::MatrixXd z(2, 4);
  z << 0.0, 0.1, 5.0, 5.1,
       0.0, 0.0, 0.0, 0.0;
  const std::vector<int> labels{0, 0, 1, 1};
  for (const auto& t : mine_hard_triplets(z, labels)) {
    EXPECT_DOUBLE_EQ(triplet_loss(z.col(t.anchor), z.col(t.positive), z.col(t.negative), 1.0), 0.0);
  }
  const std::vector<int> single{0, 0, 0, 0};
  EXPECT_TRUE(mine_hard_triplets(z, single).empty());
}

TEST(TripletWeight, LinearFromZeroToEndpoint) {
  TrainConfig cfg;
  EXPECT_DOUBLE_EQ(triplet_weight(cfg, 0, 101), 0.0);
  EXPECT_DOUBLE_EQ(triplet_weight(cfg, 100, 101), 0.2);
  EXPECT_NEAR(triplet_weight(cfg, 50, 101), 0.1, 1e-15);
}

TEST(Gradients, ReconstructionTerm) {
  const auto r = check_pretrain_term({1.0, 0.0, 0.0}, 11);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
  EXPECT_GT(r.checked, 100);
}

TEST(Gradients, KlTerm) {
  const auto r = check_pretrain_term({0.0, 1.0, 0.0}, 12);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
  EXPECT_GT(r.checked, 100);
}

TEST(Gradients, TripletTerm) {
  // A large margin keeps every hinge active.
  const auto r = check_pretrain_term({0.0, 0.0, 1.0}, 13, 50.0);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
  EXPECT_GT(r.checked, 100);
}

TEST(Gradients, CombinedObjective) {
  const auto r = check_pretrain_term({1.0, 0.01, 0.2}, 14, 50.0);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
  EXPECT_GT(r.checked, 100);
}

TEST(Gradients, FinetuneBceAndMse) {
  for (const std::string task : {"negativity", "noon:purity", "cat:size"}) {
    const auto r = check_finetune_term(task, 15);
    EXPECT_LT(r.max_rel_error, 1e-4) << task << ": " << r.worst;
  }
}

std::vector<PretrainSample> synthetic_samples(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<PretrainSample> out;
  for (int s = 0; s < n; ++s) {
    PretrainSample ps;
    ps.num_modes = 1;
    const double width = rng.uniform(1.0, 4.0);
    for (const auto& setting : stage_settings(1, Stage::kPretrain)) {
      HomodyneRecord r;
      r.setting = setting;
      double total = 0.0;
      for (int k = 0; k < kHistogramBins; ++k) {
        const double x = k - 24.5 + 3.0 * std::cos(2.0 * setting.phase);
        total += (r.histogram.bins[k] = std::exp(-x * x / (2.0 * width * width)) + 1e-6);
      }
      for (double& b : r.histogram.bins) b /= total;
      ps.records.push_back(r);
    }
    out.push_back(ps);
  }
  return out;
}

TEST(Gradients, FcnnBceAndMse) {
  for (const std::string task : {"negativity", "noon:purity", "squeezed:qfi"}) {
    const auto r = statelab::testing::check_fcnn_term(task, 31);
    EXPECT_LT(r.max_rel_error, 1e-4) << task << ": " << r.worst;
    EXPECT_GT(r.checked, 1000);
  }
}

TEST(Pretrain, IdenticalSeedsGiveIdenticalModels) {
  const auto data = synthetic_samples(6, 1);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_states = 3;
  OsfmModel a = OsfmModel::create(cfg.dims, 2);
  OsfmModel b = OsfmModel::create(cfg.dims, 2);
  AdamState sa, sb;
  pretrain(a, sa, data, cfg);
  pretrain(b, sb, data, cfg);
  EXPECT_TRUE(a == b);
}

TEST(Pretrain, ResumeReproducesUninterruptedRun) {
  const auto data = synthetic_samples(6, 2);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_states = 3;
  OsfmModel full = OsfmModel::create(cfg.dims, 3);
  AdamState sf;
  const auto path = (std::filesystem::temp_directory_path() / "statelab_resume_test.bin").string();
  pretrain(full, sf, data, cfg, 0, [&](const EpochLog& l) {
    if (l.epoch == 0) save_checkpoint(path, {full, cfg, sf, 1, {}});
  });
  Checkpoint resumed = load_checkpoint(path);
  pretrain(resumed.model, resumed.adam, data, resumed.config, resumed.epochs_done);
  EXPECT_TRUE(resumed.model == full);
  std::filesystem::remove(path);
}

TEST(Pretrain, LambdaLogRunsFromZeroToEndpoint) {
  const auto data = synthetic_samples(4, 3);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_states = 2;
  OsfmModel m = OsfmModel::create(cfg.dims, 4);
  AdamState s;
  const auto logs = pretrain(m, s, data, cfg);
  EXPECT_DOUBLE_EQ(logs.front().lambda_start, 0.0);
  EXPECT_DOUBLE_EQ(logs.back().lambda_end, 0.2);
}

TEST(Pretrain, ReconstructionOnlyOverfitDecreasesMonotonically) {
  // Fixed batch, beta = 0 and lambda = 0: plain reconstruction descent.
  const auto data = synthetic_samples(10, 4);
  TrainConfig cfg;
  cfg.kl_weight = 0.0;
  cfg.triplet_weight_max = 0.0;
  cfg.subsets_per_state = 2;
  cfg.adam.lr = 1e-4;
  OsfmModel m = OsfmModel::create(cfg.dims, 5);
  Rng rng(6);
  std::vector<int> all(10);
  std::iota(all.begin(), all.end(), 0);
  const auto items = sample_pretrain_items(data, all, cfg, rng);
  const Eigen::MatrixXd zero_noise = Eigen::MatrixXd::Zero(cfg.dims.latent_dim, 10 * 2 * cfg.queries_per_subset);
  AdamState s;
  double prev = 0.0;
  for (int step = 0; step < 200; ++step) {
    OsfmModel g = m.zeros_like();
    const double loss = pretrain_objective(m, items, {1.0, 0.0, 0.0}, cfg.margin, zero_noise, &g).total;
    if (step > 50) EXPECT_LE(loss, prev + 1e-12) << "step " << step;
    prev = loss;
    adam_step(m.pretrain_parameters(), g.pretrain_parameters(), s, cfg.adam);
  }
}

TEST(Finetune, RejectsUnknownTaskAndMissingExtraInput) {
  OsfmModel m = OsfmModel::create({}, 7);
  Rng rng(8);
  LabelledExample ex{random_records(3, 50, rng), {}, 0.5};
  std::vector<LabelledExample> data{ex, ex};
  FinetuneConfig cfg;
  cfg.epochs = 1;
  EXPECT_THROW(finetune(m, "bogus", data, cfg), ValidationError);
  EXPECT_THROW(finetune(m, "noon:purity", data, cfg), ValidationError);
  EXPECT_THROW(predict_property(m, "cat:size", ex.records), ValidationError);
}

TEST(Finetune, NegativityOutputIsProbabilityAndFrozenEncoderStaysFixed) {
  OsfmModel m = OsfmModel::create({}, 9);
  Rng rng(10);
  std::vector<LabelledExample> data;
  for (int i = 0; i < 8; ++i) data.push_back({random_records(6, 50, rng), {}, double(i % 2)});
  FinetuneConfig cfg;
  cfg.epochs = 3;
  cfg.freeze_encoder = true;
  const Mlp trunk = m.enc_trunk;
  finetune(m, "negativity", data, cfg);
  EXPECT_TRUE(m.enc_trunk == trunk);
  for (double p : predict_batch(m, "negativity", data)) {
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
  }
  cfg.freeze_encoder = false;
  finetune(m, "negativity", data, cfg);
  EXPECT_FALSE(m.enc_trunk == trunk);
  EXPECT_EQ(predict_batch(m, "negativity", data), predict_batch(m, "negativity", data));
}

TEST(Finetune, HeadInputsAreStandardizedOnTheTrainingSet) {
  OsfmModel m = OsfmModel::create({}, 21);
  Rng rng(22);
  std::vector<LabelledExample> data;
  for (int i = 0; i < 12; ++i) data.push_back({random_records(5, 50, rng), {double(1 + i % 8)}, 0.1 * i});
  FinetuneConfig cfg;
  cfg.epochs = 1;
  cfg.freeze_encoder = true;
  finetune(m, "noon:purity", data, cfg);
  const FeatureScaler& s = m.heads.at("noon:purity").inputs;
  ASSERT_EQ(s.mean.size(), m.dims.z_dim + 1);
  Eigen::MatrixXd x(s.mean.size(), data.size());
  for (std::size_t j = 0; j < data.size(); ++j) {
    x.col(j) << encode_representation(m, data[j].records), data[j].extra[0];
  }
  s.apply(x);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    EXPECT_NEAR(x.row(i).mean(), 0.0, 1e-9);
    EXPECT_NEAR(x.row(i).squaredNorm() / x.cols(), 1.0, 1e-9);
  }
}

TEST(Finetune, FirstEncoderStepIsScaledLearningRate) {
  // Adam's first update has magnitude lr per element wherever |g| >> eps.
  OsfmModel m = OsfmModel::create({}, 23);
  Rng rng(24);
  std::vector<LabelledExample> data;
  for (int i = 0; i < 6; ++i) data.push_back({random_records(4, 50, rng), {}, double(i % 2)});
  const OsfmModel before = m;
  FinetuneConfig cfg;
  cfg.epochs = 1;
  cfg.batch = 6;
  cfg.adam.lr = 1e-3;
  cfg.encoder_lr_scale = 0.25;
  finetune(m, "negativity", data, cfg);
  auto max_step = [](const std::vector<ParamRef>& a, const std::vector<ParamRef>& b) {
    double step = 0.0;
    for (std::size_t t = 0; t < a.size(); ++t)
      for (Eigen::Index i = 0; i < a[t].size(); ++i) step = std::max(step, std::abs(a[t].data[i] - b[t].data[i]));
    return step;
  };
  OsfmModel copy = before;
  EXPECT_NEAR(max_step(m.encoder_parameters(), copy.encoder_parameters()), 0.25e-3, 1e-8);
  cfg.encoder_lr_scale = 0.0;
  EXPECT_THROW(finetune(m, "negativity", data, cfg), ValidationError);
}

TEST(Finetune, RegressionLearnsASimpleTarget) {
  OsfmModel m = OsfmModel::create({}, 11);
  Rng rng(12);
  std::vector<LabelledExample> data;
  for (int i = 0; i < 40; ++i) {
    LabelledExample ex{random_records(4, 50, rng), {}, 0.0};
    ex.label = 10.0 + 5.0 * ex.records.histograms.row(0).mean() * 50.0;
    data.push_back(ex);
  }
  FinetuneConfig cfg;
  cfg.epochs = 300;
  cfg.batch = 8;
  finetune(m, "cat:size", data, cfg);
  const auto pred = predict_batch(m, "cat:size", data);
  double err = 0.0, var = 0.0, mean = 0.0;
  for (const auto& ex : data) mean += ex.label / data.size();
  for (std::size_t i = 0; i < data.size(); ++i) {
    err += std::pow(pred[i] - data[i].label, 2);
    var += std::pow(data[i].label - mean, 2);
  }
  EXPECT_LT(err / var, 0.2);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto path = (std::filesystem::temp_directory_path() / "statelab_ckpt_test.bin").string();
  Checkpoint c;
  c.model = OsfmModel::create({}, 13);
  Rng rng(14);
  std::vector<LabelledExample> data;
  for (int i = 0; i < 4; ++i) data.push_back({random_records(3, 50, rng), {double(i + 1)}, 0.1 * i});
  FinetuneConfig fc;
  fc.epochs = 1;
  finetune(c.model, "noon:purity", data, fc);
  c.config.seed = 99;
  c.config.adam.lr = 3.3e-4;
  c.adam.step = 7;
  c.adam.m.push_back(Eigen::VectorXd::Random(5));
  c.adam.v.push_back(Eigen::VectorXd::Random(5));
  c.epochs_done = 4;
  c.metadata["note"] = "x";
  save_checkpoint(path, c);
  const Checkpoint back = load_checkpoint(path);
  EXPECT_TRUE(back == c);
  EXPECT_EQ(predict_batch(back.model, "noon:purity", data), predict_batch(c.model, "noon:purity", data));

  // Flip one payload byte.
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(-20, std::ios::end);
    char byte = 0;
    f.read(&byte, 1);
    f.seekp(-20, std::ios::end);
    byte ^= 0x1;
    f.write(&byte, 1);
  }
  EXPECT_THROW(load_checkpoint(path), IoError);
  std::filesystem::remove(path);
}

TEST(Fcnn, TrainsAndRoundTrips) {
  Rng rng(15);
  std::vector<LabelledExample> data;
  for (int i = 0; i < 20; ++i) {
    LabelledExample ex{random_records(3, 50, rng), {}, 0.0};
    ex.label = ex.records.histograms(0, 0) > 0.02 ? 1.0 : 0.0;
    data.push_back(ex);
  }
  FinetuneConfig cfg;
  cfg.epochs = 5;
  const FcnnBaseline model = train_fcnn("negativity", data, cfg);
  const auto path = (std::filesystem::temp_directory_path() / "statelab_fcnn_test.bin").string();
  save_fcnn(path, model);
  const FcnnBaseline back = load_fcnn(path);
  EXPECT_TRUE(back == model);
  EXPECT_EQ(fcnn_predict(back, data), fcnn_predict(model, data));
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace statelab::nn
