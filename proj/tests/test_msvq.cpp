#include <doctest.h>

#include "csvq/msvq.hpp"

using namespace csvq;

namespace {

RowMatrix random_rows(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  RowMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

Codebook codebook_of(RowMatrix v) {
  Codebook cb;
  cb.vectors = std::move(v);
  return cb;
}

StagePlan random_plan(const std::vector<int>& rates, int dim, double eps, Rng& rng) {
  StagePlan plan;
  plan.stage_rates = rates;
  for (int r : rates) {
    plan.stage_channels.push_back(Dmc::bsc(r, eps));
    plan.stage_codebooks.push_back(codebook_of(random_rows(Eigen::Index{1} << r, dim, rng)));
  }
  return plan;
}

// argmin over i_l of E[|x - sum_t c_{J_t}|^2 | i_0..i_l], summing over every
// received combination (j_0..j_l).
std::uint32_t brute_force_stage(const Vector& x, const StagePlan& plan, int stage,
                                const std::vector<std::uint32_t>& prior) {
  std::vector<Matrix> p;
  for (int t = 0; t <= stage; ++t) p.push_back(plan.stage_channels[static_cast<std::size_t>(t)].matrix());
  const auto size = plan.stage_codebooks[static_cast<std::size_t>(stage)].size();
  std::uint32_t best = 0;
  double best_val = 0.0;
  for (std::uint32_t cand = 0; cand < size; ++cand) {
    std::vector<std::uint32_t> sent = prior;
    sent.push_back(cand);
    std::vector<std::size_t> j(static_cast<std::size_t>(stage + 1), 0);
    double val = 0.0;
    while (true) {
      double prob = 1.0;
      Vector r = x;
      for (int t = 0; t <= stage; ++t) {
        const auto tu = static_cast<std::size_t>(t);
        prob *= p[tu](sent[tu], static_cast<Eigen::Index>(j[tu]));
        r -= plan.stage_codebooks[tu].vectors.row(static_cast<Eigen::Index>(j[tu])).transpose();
      }
      val += prob * r.squaredNorm();
      int t = stage;
      while (t >= 0 && ++j[static_cast<std::size_t>(t)] == plan.stage_codebooks[static_cast<std::size_t>(t)].size()) {
        j[static_cast<std::size_t>(t)] = 0;
        --t;
      }
      if (t < 0) break;
    }
    if (cand == 0 || val < best_val) {
      best_val = val;
      best = cand;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("split_rate") {
  CHECK(split_rate(12, 2) == std::vector<int>{6, 6});
  CHECK(split_rate(15, 2) == std::vector<int>{8, 7});
  CHECK(split_rate(7, 3) == std::vector<int>{3, 2, 2});
  CHECK_THROWS(split_rate(4, 0));
}

TEST_CASE("one stage encodes like covq") {
  Rng rng = make_stream(51, {});
  const StagePlan plan = random_plan({5}, 3, 0.05, rng);
  const MsvqEncoder enc(plan);
  for (int t = 0; t < 200; ++t) {
    const Vector x = random_rows(1, 3, rng).row(0).transpose();
    CHECK(msvq_encode_stage(x, 0, {}, plan).index ==
          covq_encode(x, plan.stage_codebooks[0], plan.stage_channels[0]));
  }
}

TEST_CASE("a zero first stage leaves the covq rule for stage two") {
  Rng rng = make_stream(52, {});
  StagePlan plan = random_plan({2, 3}, 3, 0.1, rng);
  plan.stage_codebooks[0].vectors.setZero();
  for (int t = 0; t < 100; ++t) {
    const Vector x = random_rows(1, 3, rng).row(0).transpose();
    const std::vector<std::uint32_t> prior{static_cast<std::uint32_t>(t % 4)};
    CHECK(msvq_encode_stage(x, 1, prior, plan).index ==
          covq_encode(x, plan.stage_codebooks[1], plan.stage_channels[1]));
  }
}

TEST_CASE("stage rule matches the exhaustive expectation") {
  Rng rng = make_stream(53, {});
  std::uniform_int_distribution<int> dim(1, 4), rate(1, 2);
  std::uniform_real_distribution<double> eps(0.0, 0.25);
  for (int t = 0; t < 150; ++t) {
    const int n = dim(rng);
    const int stages = t % 3 == 0 ? 3 : 2;
    std::vector<int> rates;
    for (int l = 0; l < stages; ++l) rates.push_back(rate(rng));
    const StagePlan plan = random_plan(rates, n, eps(rng), rng);
    const MsvqEncoder enc(plan);
    const RowMatrix xs = random_rows(8, n, rng, 1.5);
    std::vector<IndexVector> batch;
    for (int l = 0; l < stages; ++l) {
      IndexVector idx;
      Vector scores;
      enc.encode_stage_batch(xs, l, batch, idx, scores);
      batch.push_back(idx);
    }
    for (Eigen::Index s = 0; s < xs.rows(); ++s) {
      const Vector x = xs.row(s).transpose();
      std::vector<std::uint32_t> prior;
      for (int l = 0; l < stages; ++l) {
        const std::uint32_t want = brute_force_stage(x, plan, l, prior);
        CHECK(enc.encode_stage(x, l, prior).index == want);
        CHECK(batch[static_cast<std::size_t>(l)][static_cast<std::size_t>(s)] == want);
        prior.push_back(want);
      }
    }
  }
}

TEST_CASE("encoder cost stays within the stage budget") {
  Rng rng = make_stream(54, {});
  const StagePlan plan = random_plan({4, 3, 2}, 5, 0.01, rng);
  const MsvqEncoder enc(plan);
  EncoderOpCount ops;
  enc.encode(Vector::Zero(5), &ops);
  CHECK(ops.candidate_flops == 2 * 5 * 16 + (2 * 5 + 1) * 8 + (2 * 5 + 2) * 4);
  CHECK(ops.setup_flops == 0);
  CHECK(msvq_encoder_flop_budget(5, {4, 3, 2}) == 11 * (16 + 8 + 4));
}

TEST_CASE("stage decoder updates") {
  SUBCASE("one stage is the covq update") {
    Rng rng = make_stream(55, {});
    const StagePlan plan = random_plan({3}, 2, 0.1, rng);
    const RowMatrix x = random_rows(100, 2, rng);
    IndexVector idx(100);
    for (std::size_t s = 0; s < 100; ++s) idx[s] = static_cast<std::uint32_t>((s * 7) % 8);
    const Codebook a = msvq_decoder_update_stage(x, {idx}, plan, 0);
    const Codebook b = covq_decoder_update(x, idx, plan.stage_channels[0], plan.stage_codebooks[0]);
    CHECK(a.vectors == b.vectors);
  }
  SUBCASE("noiseless second stage averages residuals") {
    StagePlan plan;
    plan.stage_rates = {1, 1};
    plan.stage_channels = {Dmc::noiseless(1), Dmc::noiseless(1)};
    RowMatrix c1(2, 1), c2(2, 1);
    c1 << 1, -1;
    c2 << 0, 0;
    plan.stage_codebooks = {codebook_of(c1), codebook_of(c2)};
    RowMatrix x(4, 1);
    x << 1.5, 0.5, -0.75, -1.75;
    const Codebook cb = msvq_decoder_update_stage(x, {{0, 0, 1, 1}, {0, 1, 0, 1}}, plan, 1);
    CHECK(cb.vectors(0, 0) == doctest::Approx((0.5 + 0.25) / 2));
    CHECK(cb.vectors(1, 0) == doctest::Approx((-0.5 - 0.75) / 2));
  }
  SUBCASE("two samples over two noisy stages") {
    StagePlan plan;
    plan.stage_rates = {1, 1};
    plan.stage_channels = {Dmc::bsc(1, 0.1), Dmc::bsc(1, 0.1)};
    RowMatrix c1(2, 2);
    c1 << 1, 0, -1, 0;
    plan.stage_codebooks = {codebook_of(c1), codebook_of(RowMatrix::Zero(2, 2))};
    RowMatrix x(2, 2);
    x << 1, 1, -1, 0.5;
    // Residuals against E[c_J1 | i1] = (+-0.8, 0): (0.2, 1) and (-0.2, 0.5).
    const Codebook cb = msvq_decoder_update_stage(x, {{0, 1}, {0, 1}}, plan, 1);
    CHECK(std::abs(cb.vectors(0, 0) - 0.16) < 1e-12);
    CHECK(std::abs(cb.vectors(0, 1) - 0.95) < 1e-12);
    CHECK(std::abs(cb.vectors(1, 0) + 0.16) < 1e-12);
    CHECK(std::abs(cb.vectors(1, 1) - 0.55) < 1e-12);
  }
}

TEST_CASE("single-stage training reproduces covq exactly") {
  Rng rng = make_stream(56, {});
  const RowMatrix x = random_rows(4000, 3, rng);
  for (double eps : {0.0, 0.03}) {
    const Dmc dmc = eps == 0.0 ? Dmc::noiseless(5) : Dmc::bsc(5, eps);
    const VqTrainResult a = train_covq(x, dmc, TrainConfig{});
    const MsvqTrainResult b = train_msvq(x, {5}, {dmc}, TrainConfig{});
    CHECK(b.plan.stage_codebooks[0].vectors == a.codebook.vectors);
    CHECK(b.stage_distortion[0] == a.final_distortion);
    REQUIRE(b.traces[0].size() == a.traces.size());
    for (std::size_t i = 0; i < a.traces.size(); ++i) {
      CHECK(b.traces[0][i].distortion == a.traces[i].distortion);
    }
  }
}

TEST_CASE("multi-stage training") {
  Rng rng = make_stream(57, {});
  const RowMatrix x = random_rows(6000, 3, rng);
  const TrainConfig cfg;
  const std::vector<Dmc> noisy{Dmc::bsc(3, 0.02), Dmc::bsc(3, 0.02)};
  const MsvqTrainResult two = train_msvq(x, {3, 3}, noisy, cfg);
  for (const auto& stage : two.traces) {
    for (const auto& t : stage) CHECK(is_non_increasing(t));
  }
  CHECK(two.stage_distortion[1] <= two.stage_distortion[0]);
  const VqTrainResult one = train_covq(x, Dmc::bsc(6, 0.02), cfg);
  CHECK(one.final_distortion <= two.stage_distortion[1]);

  const MsvqTrainResult clean = train_msvq(x, {3, 3}, {Dmc::noiseless(3), Dmc::noiseless(3)}, cfg);
  const MsvqTrainResult refined = train_msvq(x, {3, 3}, noisy, cfg, CodebookDomain::kSource, &clean.plan);
  CHECK(refined.plan.trained());
  const MsvqTrainResult meas = train_msnnc(x, {3, 3}, noisy, cfg);
  CHECK(meas.plan.stage_codebooks[1].domain == CodebookDomain::kMeasurement);
  CHECK(meas.plan.stage_codebooks[1].vectors == two.plan.stage_codebooks[1].vectors);
}
