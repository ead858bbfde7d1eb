#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "anlcl/losses.hpp"
#include "oracles.hpp"

using namespace anlcl;

namespace {

using Md = Emb<double>;

Md unit_rows(int n, int d, Rng& rng) {
  Md m(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) m(i, j) = rng.normal();
    m.row(i).normalize();
  }
  return m;
}

Tensor<double> random_tensor(int c, int h, int w, Rng& rng, double lo = 0.0, double hi = 1.0) {
  Tensor<double> t(c, h, w);
  for (std::int64_t i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(lo, hi);
  return t;
}

Md identical_rows(int n, int d) {
  Md m(n, d);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(d);
  v[0] = 1.0;
  for (int i = 0; i < n; ++i) m.row(i) = v.transpose();
  return m;
}

}  // namespace

TEST_CASE("self_consistency") {
  Rng rng(1);
  const auto o = random_tensor(3, 8, 8, rng);
  auto b = random_tensor(3, 8, 8, rng);
  auto r = random_tensor(3, 8, 8, rng);

  // exact decomposition gives zero
  Tensor<double> r_exact = o;
  r_exact.flat() -= b.flat();
  CHECK(std::abs(self_consistency<double>(o, b, r_exact)) <= 1e-18);

  const auto ones = Tensor<double>::constant(1, 4, 4, 1.0);
  const Tensor<double> zeros(1, 4, 4);
  CHECK(self_consistency<double>(ones, zeros, zeros) == doctest::Approx(1.0));

  CHECK(self_consistency<double>(o, b, r) ==
        doctest::Approx(oracle::self_consistency(o, b, r)).epsilon(1e-12));

  const Tensor<double> wrong(3, 4, 4);
  CHECK_THROWS_AS(self_consistency<double>(o, b, wrong), Error);

  // gradient check wrt all three inputs
  Tensor<double> db(3, 8, 8), dr(3, 8, 8), dox(3, 8, 8);
  self_consistency<double>(o, b, r, &db, &dr, &dox);
  auto value = [&] { return double(self_consistency<double>(o, b, r)); };
  CHECK(oracle::gradient_check(value, b.data(), db.data(), b.size()) < 1e-3);
  CHECK(oracle::gradient_check(value, r.data(), dr.data(), r.size()) < 1e-3);
  CHECK(oracle::gradient_check(value, const_cast<double*>(o.data()), dox.data(), o.size()) < 1e-3);
}

TEST_CASE("rain_sparsity") {
  Rng rng(2);
  const Tensor<double> zero(1, 8, 8);
  CHECK(rain_sparsity<double>(zero) == 0.0);
  CHECK(rain_sparsity<double>(Tensor<double>::constant(1, 8, 8, 0.5)) == doctest::Approx(0.5));

  auto r = random_tensor(3, 8, 8, rng, -1.0, 1.0);
  CHECK(rain_sparsity<double>(r) == doctest::Approx(oracle::rain_sparsity(r)).epsilon(1e-12));

  Tensor<double> dr(3, 8, 8);
  rain_sparsity<double>(r, &dr);
  auto value = [&] { return double(rain_sparsity<double>(r)); };
  CHECK(oracle::gradient_check(value, r.data(), dr.data(), r.size()) < 1e-3);
}

TEST_CASE("adversarial_losses") {
  const auto half = Tensor<double>::constant(1, 4, 4, 0.5);
  const auto adv = adversarial_losses<double>(half, half);
  CHECK(adv.loss_d == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
  CHECK(adv.loss_g == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Rng rng(3);
  auto real = random_tensor(1, 6, 6, rng, 0.05, 0.95);
  auto fake = random_tensor(1, 5, 5, rng, 0.05, 0.95);
  const auto a = adversarial_losses<double>(real, fake);
  CHECK(a.loss_d == doctest::Approx(oracle::adv_loss_d(real, fake)).epsilon(1e-12));
  CHECK(a.loss_g == doctest::Approx(oracle::adv_loss_g(fake)).epsilon(1e-12));

  // saturation is clamped, not infinite
  const auto zeros = Tensor<double>::constant(1, 4, 4, 0.0);
  const auto sat = adversarial_losses<double>(zeros, Tensor<double>::constant(1, 4, 4, 1.0));
  CHECK(std::isfinite(sat.loss_d));
  CHECK(std::isfinite(sat.loss_g));

  // gradients wrt both probability maps
  Tensor<double> g_real(1, 6, 6), g_fake_d(1, 5, 5), g_fake_g(1, 5, 5);
  adversarial_losses<double>(real, fake, &g_real, &g_fake_d, &g_fake_g);
  auto loss_d = [&] { return double(adversarial_losses<double>(real, fake).loss_d); };
  auto loss_g = [&] { return double(adversarial_losses<double>(real, fake).loss_g); };
  CHECK(oracle::gradient_check(loss_d, real.data(), g_real.data(), real.size()) < 1e-3);
  CHECK(oracle::gradient_check(loss_d, fake.data(), g_fake_d.data(), fake.size()) < 1e-3);
  CHECK(oracle::gradient_check(loss_g, fake.data(), g_fake_g.data(), fake.size()) < 1e-3);
}

TEST_CASE("layer_contrastive closed forms") {
  ContrastiveConfig cfg;
  cfg.use_log_form = false;

  // identical embeddings, N_B = N_R = 4: literal value is exactly -2
  const Md e4 = identical_rows(4, 8);
  CHECK(std::abs(layer_contrastive<double>(e4, e4, e4, e4, e4, e4, cfg) - (-2.0)) <= 1e-9);

  // swapping the B and R groups leaves the value unchanged
  Rng rng(4);
  const Md fb_a = unit_rows(3, 8, rng), fb_p = unit_rows(3, 8, rng), fb_n = unit_rows(3, 8, rng);
  const Md fr_a = unit_rows(5, 8, rng), fr_p = unit_rows(5, 8, rng), fr_n = unit_rows(5, 8, rng);
  for (bool log_form : {false, true}) {
    cfg.use_log_form = log_form;
    const double v1 = layer_contrastive<double>(fb_a, fb_p, fr_a, fr_p, fb_n, fr_n, cfg);
    const double v2 = layer_contrastive<double>(fr_a, fr_p, fb_a, fb_p, fr_n, fb_n, cfg);
    CHECK(v1 == doctest::Approx(v2).epsilon(1e-12));
  }
}

TEST_CASE("layer_contrastive oracle equivalence and gradients") {
  Rng rng(5);
  ContrastiveConfig cfg;
  for (bool log_form : {true, false}) {
    for (bool norm : {true, false}) {
      cfg.use_log_form = log_form;
      cfg.normalize_pairs = norm;
      Md fb_a = unit_rows(3, 6, rng), fb_p = unit_rows(3, 6, rng), fr_n = unit_rows(5, 6, rng);
      Md fr_a = unit_rows(5, 6, rng), fr_p = unit_rows(5, 6, rng), fb_n = unit_rows(3, 6, rng);
      const double got = layer_contrastive<double>(fb_a, fb_p, fr_a, fr_p, fb_n, fr_n, cfg);
      const double want = oracle::layer_contrastive(fb_a, fb_p, fr_a, fr_p, fb_n, fr_n,
                                                    cfg.temperature, log_form, norm);
      CHECK(got == doctest::Approx(want).epsilon(1e-10));

      LayerContrastiveGrads<double> g;
      layer_contrastive<double>(fb_a, fb_p, fr_a, fr_p, fb_n, fr_n, cfg, &g);
      auto value = [&] {
        return double(layer_contrastive<double>(fb_a, fb_p, fr_a, fr_p, fb_n, fr_n, cfg));
      };
      CHECK(oracle::gradient_check(value, fb_a.data(), g.d_fb_anchor.data(), fb_a.size()) < 1e-3);
      CHECK(oracle::gradient_check(value, fb_p.data(), g.d_fb_pos.data(), fb_p.size()) < 1e-3);
      CHECK(oracle::gradient_check(value, fr_a.data(), g.d_fr_anchor.data(), fr_a.size()) < 1e-3);
      CHECK(oracle::gradient_check(value, fr_p.data(), g.d_fr_pos.data(), fr_p.size()) < 1e-3);
      CHECK(oracle::gradient_check(value, fb_n.data(), g.d_fb_neg.data(), fb_n.size()) < 1e-3);
      CHECK(oracle::gradient_check(value, fr_n.data(), g.d_fr_neg.data(), fr_n.size()) < 1e-3);
    }
  }

  ContrastiveConfig bad;
  bad.temperature = 0.0;
  const Md e = identical_rows(2, 4);
  CHECK_THROWS_AS(layer_contrastive<double>(e, e, e, e, e, e, bad), Error);
}

TEST_CASE("location_contrastive closed forms") {
  ContrastiveConfig cfg;

  // all similarities equal, 3 negatives per anchor: ln(1+3) per anchor
  const Md pos = identical_rows(2, 8);
  const Md anchor = identical_rows(2, 8);
  const Md neg = identical_rows(6, 8);
  CHECK(location_contrastive<double>(pos, anchor, neg, cfg) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));

  // tau=1, positive similarity 1, two zero-similarity negatives
  ContrastiveConfig unit;
  unit.temperature = 1.0;
  Md a(1, 2), p(1, 2), n(2, 2);
  a << 1, 0;
  p << 1, 0;
  n << 0, 1, 0, -1;
  CHECK(location_contrastive<double>(p, a, n, unit) ==
        doctest::Approx(-std::log(std::exp(1.0) / (std::exp(1.0) + 2.0))).epsilon(1e-12));
}

TEST_CASE("location_contrastive oracle, monotonicity, gradients") {
  Rng rng(6);
  ContrastiveConfig cfg;
  const int n = 4, nn = 3, d = 6;
  Md pos = unit_rows(n, d, rng);
  Md anchor = unit_rows(n, d, rng);
  Md neg = unit_rows(n * nn, d, rng);

  for (bool log_form : {true, false}) {
    cfg.use_log_form = log_form;
    const double got = location_contrastive<double>(pos, anchor, neg, cfg);
    const double want = oracle::location_contrastive(pos, anchor, neg, cfg.temperature, log_form);
    CHECK(got == doctest::Approx(want).epsilon(1e-10));
  }

  cfg.use_log_form = true;
  LocationContrastiveGrads<double> g;
  location_contrastive<double>(pos, anchor, neg, cfg, &g);
  auto value = [&] { return double(location_contrastive<double>(pos, anchor, neg, cfg)); };
  CHECK(oracle::gradient_check(value, pos.data(), g.d_v_o_pos.data(), pos.size()) < 1e-3);
  CHECK(oracle::gradient_check(value, anchor.data(), g.d_v_b_anchor.data(), anchor.size()) < 1e-3);
  CHECK(oracle::gradient_check(value, neg.data(), g.d_v_o_neg.data(), neg.size()) < 1e-3);

  // log form strictly decreases as the positive similarity rises
  Md a1(1, 2), n1(2, 2);
  a1 << 1, 0;
  n1 << 0, 1, 0.3, 0.7;
  double prev = 1e300;
  for (double s : {-0.5, 0.0, 0.5, 0.9}) {
    Md p1(1, 2);
    p1 << s, std::sqrt(1 - s * s);
    const double v = location_contrastive<double>(p1, a1, n1, cfg);
    CHECK(v < prev);
    prev = v;
  }

  const Md mismatch = unit_rows(n * nn + 1, d, rng);
  CHECK_THROWS_AS(location_contrastive<double>(pos, anchor, mismatch, cfg), Error);
}

TEST_CASE("margin_loss") {
  // identical features: every hinge term equals eps
  const Md same_r = identical_rows(3, 4), same_b = identical_rows(4, 4);
  CHECK(margin_loss<double>(same_r, same_b, 1.0, 1) == doctest::Approx(1.0).epsilon(1e-12));

  // well separated image pairs clamp the hinge to zero
  Md far_b(2, 2);
  far_b << 1, 0, -1, 0;  // pairwise squared distance 4
  CHECK(margin_loss<double>(same_r, far_b, 1.0, 1) == 0.0);

  Rng rng(7);
  Md f_r = unit_rows(4, 5, rng), f_b = unit_rows(3, 5, rng);
  for (int eta : {1, -1})
    for (bool norm : {true, false})
      CHECK(margin_loss<double>(f_r, f_b, 1.0, eta, norm) ==
            doctest::Approx(oracle::margin_loss(f_r, f_b, 1.0, eta, norm)).epsilon(1e-10));

  // non-negativity on random draws
  for (int i = 0; i < 20; ++i) {
    Md a = unit_rows(3, 4, rng), b = unit_rows(3, 4, rng);
    CHECK(margin_loss<double>(a, b, 1.0, (i % 2) ? 1 : -1) >= 0.0);
  }

  Md d_r = Md::Zero(4, 5), d_b = Md::Zero(3, 5);
  margin_loss<double>(f_r, f_b, 0.8, 1, true, &d_r, &d_b);
  auto value = [&] { return double(margin_loss<double>(f_r, f_b, 0.8, 1)); };
  CHECK(oracle::gradient_check(value, f_r.data(), d_r.data(), f_r.size()) < 1e-3);
  CHECK(oracle::gradient_check(value, f_b.data(), d_b.data(), f_b.size()) < 1e-3);

  CHECK_THROWS_AS(margin_loss<double>(f_r, f_b, 1.0, 2), Error);
  CHECK_THROWS_AS(margin_loss<double>(identical_rows(1, 4), f_b, 1.0, 1), Error);
}

TEST_CASE("asymmetric_contrastive") {
  ContrastiveConfig cfg;

  // identical embeddings, 4x4, eta=+1: ratio 1, loss -1/16
  const Md e4 = identical_rows(4, 8);
  CHECK(std::abs(asymmetric_contrastive<double>(e4, e4, cfg, 1) - (-1.0 / 16.0)) <= 1e-12);

  Rng rng(8);
  Md f_r = unit_rows(5, 6, rng), f_b = unit_rows(3, 6, rng);
  for (int eta : {1, -1})
    for (bool norm : {true, false}) {
      cfg.normalize_pairs = norm;
      CHECK(asymmetric_contrastive<double>(f_r, f_b, cfg, eta) ==
            doctest::Approx(oracle::asymmetric_contrastive(f_r, f_b, cfg.temperature, eta, norm))
                .epsilon(1e-10));
    }

  // reciprocal identity: r(+1) * r(-1) == 1, recovered through the loss path
  // as loss(+1) * loss(-1) * (N_R * N_B)^2 == 1
  cfg.normalize_pairs = true;
  const double l_pos = asymmetric_contrastive<double>(f_r, f_b, cfg, 1);
  const double l_neg = asymmetric_contrastive<double>(f_r, f_b, cfg, -1);
  CHECK(l_pos * l_neg * 15.0 * 15.0 == doctest::Approx(1.0).epsilon(1e-9));

  for (int eta : {1, -1}) {
    Md d_r = Md::Zero(5, 6), d_b = Md::Zero(3, 6);
    asymmetric_contrastive<double>(f_r, f_b, cfg, eta, &d_r, &d_b);
    auto value = [&] { return double(asymmetric_contrastive<double>(f_r, f_b, cfg, eta)); };
    CHECK(oracle::gradient_check(value, f_r.data(), d_r.data(), f_r.size()) < 1e-3);
    CHECK(oracle::gradient_check(value, f_b.data(), d_b.data(), f_b.size()) < 1e-3);
  }

  CHECK_THROWS_AS(asymmetric_contrastive<double>(f_r, f_b, cfg, 0), Error);
}

TEST_CASE("eta_from_entropy") {
  // constant image patches vs two-valued rain patches
  PatchStack<float> flat, mixed;
  for (int i = 0; i < 4; ++i) {
    flat.push(Tensor<float>::constant(1, 8, 8, 0.4f), {0, 0, 0, 8});
    Tensor<float> two(1, 8, 8);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) two(0, y, x) = (x % 2) ? 0.8f : 0.1f;
    mixed.push(std::move(two), {0, 0, 0, 8});
  }
  CHECK(eta_from_entropy(flat, mixed) == -1);
  CHECK(eta_from_entropy(mixed, flat) == 1);
  CHECK(eta_from_entropy(flat, flat) == 1);  // tie goes to +1

  PatchStack<float> empty;
  CHECK_THROWS_AS(eta_from_entropy(empty, flat), Error);
}

TEST_CASE("overall_loss") {
  LossWeights w;
  LossComponents zero;
  CHECK(overall_loss(zero, w) == 0.0);

  LossComponents ones{1, 1, 1, 1, 1, 1};
  LossWeights all_zero;
  all_zero.w_sparse = all_zero.w_adv = all_zero.w_mse = all_zero.w_loc = all_zero.w_layer =
      all_zero.w_asy = 0;
  CHECK(overall_loss(ones, all_zero) == 0.0);

  // default weights: 1 + 0.1 + 1 + 1 + 1 + 0.01
  CHECK(overall_loss(ones, w) == doctest::Approx(4.11).epsilon(1e-12));

  LossComponents bad = ones;
  bad.adv = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(overall_loss(bad, w), Error);
}

TEST_CASE("losses stay finite for unit-norm inputs at small temperature") {
  Rng rng(10);
  ContrastiveConfig cfg;
  cfg.temperature = 0.07;
  for (int trial = 0; trial < 5; ++trial) {
    Md a = unit_rows(4, 16, rng), p = unit_rows(4, 16, rng), n = unit_rows(6, 16, rng);
    CHECK(std::isfinite(layer_contrastive<double>(a, p, n, n, a, n, cfg)));
    CHECK(std::isfinite(location_contrastive<double>(a, a, unit_rows(8, 16, rng), cfg)));
    CHECK(std::isfinite(asymmetric_contrastive<double>(a, p, cfg, 1)));
    CHECK(std::isfinite(margin_loss<double>(a, p, 1.0, -1)));
  }
}
