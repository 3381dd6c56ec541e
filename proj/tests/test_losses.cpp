#include <doctest.h>

#include <cmath>

#include "dan/errors.hpp"
#include "dan/losses.hpp"
#include "testutil.hpp"

using namespace dan;
using dantest::random_tensor;

namespace {

Tensor prob(std::vector<real_t> v) {
  const int n = static_cast<int>(v.size());
  return Tensor({n}, std::move(v));
}

}  // namespace

TEST_CASE("nll: perfect prediction scores zero") {
  Tensor loss = nll({prob({1, 0, 0})}, {0}, 3);
  CHECK(loss.value() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("nll: direct arithmetic") {
  Tensor loss = nll({prob({0.2, 0.2, 0.6})}, {2}, 3);
  CHECK(loss.value() == doctest::Approx(-std::log(0.6)).epsilon(1e-12));
}

TEST_CASE("nll: batches sum, not average") {
  real_t a = nll({prob({0.5, 0.5})}, {0}, 2).value();
  real_t b = nll({prob({0.25, 0.75})}, {1}, 2).value();
  real_t both = nll({prob({0.5, 0.5}), prob({0.25, 0.75})}, {0, 1}, 2).value();
  CHECK(both == doctest::Approx(a + b).epsilon(1e-12));
}

TEST_CASE("nll: zero probability at the true class is clamped, never NaN") {
  Tensor loss = nll({prob({0, 1, 0})}, {0}, 3);
  CHECK(std::isfinite(loss.value()));
  CHECK(loss.value() == doctest::Approx(-std::log(kProbFloor)).epsilon(1e-9));
}

TEST_CASE("nll validates its preconditions") {
  CHECK_THROWS_AS(nll({prob({0.7, 0.7})}, {0}, 2), std::invalid_argument);  // not a distribution
  CHECK_THROWS_AS(nll({prob({0.5, 0.5})}, std::vector<Tensor>{prob({0.5, 0.5})}), std::invalid_argument);  // not one-hot
  CHECK_THROWS_AS(nll({}, std::vector<int>{}, 3), std::invalid_argument);  // empty
}

TEST_CASE("nll is non-negative, zero only at certainty") {
  dan::Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor logits = random_tensor({3}, rng, -4.0, 4.0);
    Tensor p = softmax(logits);
    real_t v = nll({p}, {rng.uniform_int(3)}, 3).value();
    CHECK(v >= 0.0);
    if (v == 0.0) CHECK(p.at(0) == 1.0);
  }
}

TEST_CASE("confusion_h: maximal confusion point") {
  Tensor loss = confusion_h({prob({0.5, 0.5}), prob({0.5, 0.5})}, {Domain::Source, Domain::Target});
  CHECK(loss.value() == doctest::Approx(2 * std::log(0.5)).epsilon(1e-12));
}

TEST_CASE("confusion_h: perfect discrimination attains the maximum 0") {
  Tensor loss = confusion_h({prob({1, 0}), prob({0, 1})}, {Domain::Source, Domain::Target});
  CHECK(loss.value() == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("confusion_h: single-domain batches are rejected") {
  CHECK_THROWS_AS(confusion_h({prob({0.9, 0.1})}, {Domain::Source}), std::invalid_argument);
  CHECK_THROWS_AS(confusion_h({}, {}), std::invalid_argument);
}

TEST_CASE("confusion_h is never positive") {
  dan::Rng rng(37);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Tensor> scores;
    std::vector<Domain> tags;
    int n = 2 + rng.uniform_int(6);
    for (int i = 0; i < n; ++i) {
      scores.push_back(softmax(random_tensor({2}, rng, -5.0, 5.0)));
      tags.push_back(i % 2 == 0 ? Domain::Source : Domain::Target);
    }
    CHECK(confusion_h(scores, tags).value() <= 1e-12);
  }
}

TEST_CASE("confusion_w: mean difference arithmetic") {
  Tensor loss = confusion_w({Tensor::scalar(1), Tensor::scalar(3), Tensor::scalar(0), Tensor::scalar(2)},
                            {Domain::Source, Domain::Source, Domain::Target, Domain::Target});
  CHECK(loss.value() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("confusion_w: identical values cancel") {
  CHECK(confusion_w({Tensor::scalar(1), Tensor::scalar(3), Tensor::scalar(3), Tensor::scalar(1)},
                    {Domain::Source, Domain::Source, Domain::Target, Domain::Target})
            .value() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(confusion_w({Tensor::scalar(5), Tensor::scalar(5)}, {Domain::Source, Domain::Target}).value() ==
        doctest::Approx(0.0));
}

TEST_CASE("confusion_w: missing domain rejected") {
  CHECK_THROWS_AS(confusion_w({Tensor::scalar(1)}, {Domain::Source}), std::invalid_argument);
}

TEST_CASE("confusion_w is antisymmetric under domain swap") {
  dan::Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    int n = 2 + rng.uniform_int(6);
    std::vector<Tensor> vals;
    std::vector<Domain> tags, swapped;
    for (int i = 0; i < n; ++i) {
      vals.push_back(Tensor::scalar(static_cast<real_t>(rng.uniform(-3.0, 3.0))));
      Domain d = i % 2 == 0 ? Domain::Source : Domain::Target;
      tags.push_back(d);
      swapped.push_back(d == Domain::Source ? Domain::Target : Domain::Source);
    }
    CHECK(confusion_w(vals, tags).value() == doctest::Approx(-confusion_w(vals, swapped).value()).epsilon(1e-10));
  }
}

TEST_CASE("coral: identical batches score zero") {
  dan::Rng rng(43);
  std::vector<Tensor> batch{random_tensor({3}, rng), random_tensor({3}, rng), random_tensor({3}, rng)};
  CHECK(coral(batch, batch).value() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("coral: d=1 hand covariance case") {
  // source values [0,2]: unbiased cov 2; target [0,0]: cov 0; (2-0)^2/4 = 1
  std::vector<Tensor> src{Tensor({1}, {0.0}), Tensor({1}, {2.0})};
  std::vector<Tensor> tgt{Tensor({1}, {0.0}), Tensor({1}, {0.0})};
  CHECK(coral(src, tgt).value() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("coral: invariant under negating both batches and under mean shifts") {
  dan::Rng rng(47);
  std::vector<Tensor> src, tgt, src_neg, tgt_neg, src_shift, tgt_shift;
  Tensor shift = random_tensor({4}, rng, -5.0, 5.0);
  for (int i = 0; i < 5; ++i) {
    Tensor s = random_tensor({4}, rng), t = random_tensor({4}, rng);
    src.push_back(s);
    tgt.push_back(t);
    src_neg.push_back(scalar_mul(s, -1));
    tgt_neg.push_back(scalar_mul(t, -1));
    src_shift.push_back(add(s, shift));
    tgt_shift.push_back(add(t, shift));
  }
  real_t base = coral(src, tgt).value();
  CHECK(base >= 0.0);
  CHECK(coral(src_neg, tgt_neg).value() == doctest::Approx(base).epsilon(1e-9));
  CHECK(coral(src_shift, tgt_shift).value() == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("coral: batches of size < 2 are rejected") {
  dan::Rng rng(53);
  std::vector<Tensor> one{random_tensor({3}, rng)};
  std::vector<Tensor> two{random_tensor({3}, rng), random_tensor({3}, rng)};
  CHECK_THROWS_AS(coral(one, two), std::invalid_argument);
  CHECK_THROWS_AS(coral(two, one), std::invalid_argument);
}

TEST_CASE("min_objective: weight collapse and arithmetic") {
  MinComponents c;
  c.stance = Tensor::scalar(1.0);
  c.subj = Tensor::scalar(2.0);
  c.obj = Tensor::scalar(3.0);
  c.align_subj = Tensor::scalar(0.0);
  c.align_obj = Tensor::scalar(0.0);

  SUBCASE("alpha=beta=gamma=0 yields exactly the stance loss") {
    LossWeights w{0, 0, 0};
    CHECK(min_objective(c, w, AlignerKind::HAdversarial).value() == 1.0);
  }
  SUBCASE("weighted sum") {
    LossWeights w{0.1, 0.1, 0.1};
    CHECK(min_objective(c, w, AlignerKind::HAdversarial).value() == doctest::Approx(1.5).epsilon(1e-12));
  }
  SUBCASE("all zero components") {
    MinComponents z;
    z.stance = Tensor::scalar(0.0);
    z.subj = Tensor::scalar(0.0);
    z.obj = Tensor::scalar(0.0);
    LossWeights w{0.1, 0.1, 0.1};
    CHECK(min_objective(z, w, AlignerKind::None).value() == 0.0);
  }
  SUBCASE("gamma term is dropped without an aligner") {
    MinComponents z = c;
    z.align_subj = Tensor::scalar(100.0);
    LossWeights w{0.1, 0.1, 0.1};
    CHECK(min_objective(z, w, AlignerKind::None).value() == doctest::Approx(1.5).epsilon(1e-12));
  }
}

TEST_CASE("min_objective is linear in each component") {
  // probe with unit components: coefficients must read (1, alpha, beta, gamma, gamma)
  LossWeights w{0.3, 0.5, 0.7};
  auto probe = [&](real_t s, real_t su, real_t ob, real_t as, real_t ao) {
    MinComponents c;
    c.stance = Tensor::scalar(s);
    c.subj = Tensor::scalar(su);
    c.obj = Tensor::scalar(ob);
    c.align_subj = Tensor::scalar(as);
    c.align_obj = Tensor::scalar(ao);
    return min_objective(c, w, AlignerKind::Wasserstein).value();
  };
  real_t zero = probe(0, 0, 0, 0, 0);
  CHECK(zero == 0.0);
  CHECK(probe(1, 0, 0, 0, 0) - zero == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(probe(0, 1, 0, 0, 0) - zero == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(probe(0, 0, 1, 0, 0) - zero == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(probe(0, 0, 0, 1, 0) - zero == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(probe(0, 0, 0, 0, 1) - zero == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("max_objective sums the configured confusion losses") {
  Tensor a = Tensor::scalar(2 * std::log(0.5));
  Tensor b = Tensor::scalar(2 * std::log(0.5));
  CHECK(max_objective(a, b, AlignerKind::HAdversarial).value() == doctest::Approx(-2.7726).epsilon(1e-4));
  SUBCASE("single view passes through unchanged") {
    CHECK(max_objective(a, Tensor(), AlignerKind::HAdversarial).value() == a.value());
    CHECK(max_objective(Tensor(), b, AlignerKind::HAdversarial).value() == b.value());
  }
  SUBCASE("zero-valued critic everywhere gives zero") {
    CHECK(max_objective(Tensor::scalar(0), Tensor::scalar(0), AlignerKind::Wasserstein).value() == 0.0);
  }
  SUBCASE("rejected under non-adversarial aligners") {
    CHECK_THROWS_AS(max_objective(a, b, AlignerKind::Coral), ConfigError);
    CHECK_THROWS_AS(max_objective(a, b, AlignerKind::None), ConfigError);
  }
}

TEST_CASE("loss gradients match finite differences through softmax") {
  dan::Rng rng(59);

  SUBCASE("nll") {
    std::vector<Tensor> logits{random_tensor({3}, rng), random_tensor({3}, rng)};
    double err = dantest::check_gradients(
        [](const std::vector<Tensor>& in) {
          return nll({softmax(in[0]), softmax(in[1])}, {1, 2}, 3);
        },
        logits);
    CHECK(err <= 1e-4);
  }
  SUBCASE("confusion_h") {
    std::vector<Tensor> logits{random_tensor({2}, rng), random_tensor({2}, rng), random_tensor({2}, rng),
                               random_tensor({2}, rng)};
    double err = dantest::check_gradients(
        [](const std::vector<Tensor>& in) {
          return confusion_h({softmax(in[0]), softmax(in[1]), softmax(in[2]), softmax(in[3])},
                             {Domain::Source, Domain::Source, Domain::Target, Domain::Target});
        },
        logits);
    CHECK(err <= 1e-4);
  }
  SUBCASE("confusion_w") {
    std::vector<Tensor> vals{random_tensor({1}, rng), random_tensor({1}, rng), random_tensor({1}, rng)};
    double err = dantest::check_gradients(
        [](const std::vector<Tensor>& in) {
          return confusion_w({in[0], in[1], in[2]}, {Domain::Source, Domain::Target, Domain::Target});
        },
        vals);
    CHECK(err <= 1e-4);
  }
  SUBCASE("coral") {
    std::vector<Tensor> feats{random_tensor({3}, rng), random_tensor({3}, rng), random_tensor({3}, rng),
                              random_tensor({3}, rng), random_tensor({3}, rng)};
    double err = dantest::check_gradients(
        [](const std::vector<Tensor>& in) {
          return coral({in[0], in[1], in[2]}, {in[3], in[4]});
        },
        feats);
    CHECK(err <= 1e-4);
  }
}
