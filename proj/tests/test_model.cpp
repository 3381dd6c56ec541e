#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "dan/errors.hpp"
#include "dan/losses.hpp"
#include "dan/model.hpp"
#include "testutil.hpp"

using namespace dan;
using dantest::random_tensor;

namespace {

std::shared_ptr<EmbeddingTable> small_table() {
  return std::make_shared<EmbeddingTable>(make_embedding_table({
      {"a", {0.1, -0.2, 0.3}},
      {"b", {0.4, 0.5, -0.6}},
      {"c", {-0.7, 0.8, 0.9}},
  }));
}

DanModel small_model(ViewMode mode, AlignerKind aligner, uint64_t seed = 1) {
  ModelSpec spec;
  spec.d_h = 4;
  spec.d_f = 5;
  spec.view_mode = mode;
  spec.aligner = aligner;
  spec.dropout_rate = 0.0;
  Rng rng(seed);
  return DanModel::init(spec, small_table(), rng);
}

void zero_ffn(FFNParams& f) {
  f.W1 = Tensor(f.W1.shape());
  f.b1 = Tensor(f.b1.shape());
  f.W2 = Tensor(f.W2.shape());
  f.b2 = Tensor(f.b2.shape());
}

}  // namespace

TEST_CASE("encode_views: independence and determinism") {
  DanModel m = small_model(ViewMode::Dual, AlignerKind::HAdversarial);
  std::vector<int> tokens{1, 2, 3};

  SUBCASE("identical encoder parameters give identical view features") {
    // overwrite the objective encoder with the subjective one
    auto subj = m.enc_subj.named_params();
    auto obj = m.enc_obj.named_params();
    for (size_t i = 0; i < subj.size(); ++i)
      std::copy(subj[i].second.data(), subj[i].second.data() + subj[i].second.size(), obj[i].second.data());
    auto [f_subj, f_obj] = encode_views(tokens, m);
    for (int i = 0; i < 4; ++i) CHECK(f_subj.at(i) == f_obj.at(i));
  }

  SUBCASE("perturbing F_obj leaves f_subj bit-identical") {
    auto [f_subj_0, f_obj_0] = encode_views(tokens, m);
    m.enc_obj.W_l.data()[0] += 0.25;
    auto [f_subj_1, f_obj_1] = encode_views(tokens, m);
    bool obj_changed = false;
    for (int i = 0; i < 4; ++i) {
      CHECK(f_subj_0.at(i) == f_subj_1.at(i));
      obj_changed = obj_changed || f_obj_0.at(i) != f_obj_1.at(i);
    }
    CHECK(obj_changed);
  }

  SUBCASE("output shapes are (d_h,)") {
    auto [f_subj, f_obj] = encode_views(tokens, m);
    CHECK(f_subj.shape() == std::vector<int>{4});
    CHECK(f_obj.shape() == std::vector<int>{4});
  }

  SUBCASE("rejected in single-view mode") {
    DanModel s = small_model(ViewMode::Single, AlignerKind::None);
    CHECK_THROWS_AS(encode_views(tokens, s), std::invalid_argument);
  }
}

TEST_CASE("fuse: gate arithmetic") {
  DanModel m = small_model(ViewMode::Dual, AlignerKind::None);
  dan::Rng rng(7);
  Tensor f_subj = random_tensor({4}, rng);
  Tensor f_obj = random_tensor({4}, rng);

  SUBCASE("zero gate parameters average the views") {
    m.gate_W = Tensor({4, 8});
    m.gate_b = Tensor({4});
    auto [g, f_dual] = fuse(f_subj, f_obj, m);
    for (int i = 0; i < 4; ++i) {
      CHECK(g.at(i) == doctest::Approx(0.5).epsilon(1e-12));
      CHECK(f_dual.at(i) == doctest::Approx((f_subj.at(i) + f_obj.at(i)) / 2).epsilon(1e-12));
    }
  }

  SUBCASE("large bias saturates the gate toward f_subj") {
    m.gate_W = Tensor({4, 8});
    m.gate_b = Tensor::full({4}, 50.0);
    auto [g, f_dual] = fuse(f_subj, f_obj, m);
    for (int i = 0; i < 4; ++i) CHECK(std::abs(f_dual.at(i) - f_subj.at(i)) <= 1e-9);
  }

  SUBCASE("equal views are a fixed point for any gate") {
    auto [g, f_dual] = fuse(f_subj, f_subj, m);
    for (int i = 0; i < 4; ++i) CHECK(f_dual.at(i) == doctest::Approx(f_subj.at(i)).epsilon(1e-12));
  }

  SUBCASE("width mismatch rejected") {
    CHECK_THROWS_AS(fuse(random_tensor({3}, rng), f_obj, m), std::invalid_argument);
  }
}

TEST_CASE("fuse invariants: gate strictly inside (0,1), f_dual inside the elementwise interval") {
  // ranges keep the pre-activation below sigmoid's double-precision
  // saturation point (|z| < 36), where openness is representable at all
  DanModel m = small_model(ViewMode::Dual, AlignerKind::None, 3);
  dan::Rng rng(11);
  for (int trial = 0; trial < 2000; ++trial) {
    for (int64_t i = 0; i < m.gate_W.size(); ++i) m.gate_W.data()[i] = static_cast<real_t>(rng.uniform(-1, 1));
    for (int64_t i = 0; i < m.gate_b.size(); ++i) m.gate_b.data()[i] = static_cast<real_t>(rng.uniform(-1, 1));
    Tensor f_subj = random_tensor({4}, rng, -3.0, 3.0);
    Tensor f_obj = random_tensor({4}, rng, -3.0, 3.0);
    auto [g, f_dual] = fuse(f_subj, f_obj, m);
    for (int i = 0; i < 4; ++i) {
      CHECK(g.at(i) > 0.0);
      CHECK(g.at(i) < 1.0);
      CHECK(f_dual.at(i) >= std::min(f_subj.at(i), f_obj.at(i)) - 1e-15);
      CHECK(f_dual.at(i) <= std::max(f_subj.at(i), f_obj.at(i)) + 1e-15);
    }
  }
}

TEST_CASE("predict_stance: uniform at zero heads, shift-invariant argmax") {
  DanModel m = small_model(ViewMode::Dual, AlignerKind::None);
  std::vector<int> tokens{1, 2};

  SUBCASE("zero-initialized stance head gives the uniform distribution") {
    zero_ffn(m.c_stance);
    Tensor p = predict_stance(tokens, m);
    for (int i = 0; i < 3; ++i) CHECK(p.at(i) == doctest::Approx(1.0 / 3).epsilon(1e-12));
  }

  SUBCASE("argmax unchanged by a constant added to every logit") {
    Tensor p0 = predict_stance(tokens, m);
    int before = argmax(p0);
    for (int i = 0; i < 3; ++i) m.c_stance.b2.data()[i] += 7.5;
    int after = argmax(predict_stance(tokens, m));
    CHECK(before == after);
  }

  SUBCASE("probabilities sum to one") {
    Tensor p = predict_stance(tokens, m);
    real_t s = 0;
    for (int i = 0; i < 3; ++i) s += p.at(i);
    CHECK(std::abs(s - 1.0) <= 1e-9);
  }
}

TEST_CASE("auxiliary_predict: zero head gives [0.5, 0.5]") {
  DanModel m = small_model(ViewMode::Dual, AlignerKind::None);
  zero_ffn(m.c_subj);
  dan::Rng rng(5);
  Tensor p = auxiliary_predict(random_tensor({4}, rng), m.c_subj);
  CHECK(p.at(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p.at(1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("examine: variants and rejections") {
  dan::Rng rng(13);
  Tensor f = random_tensor({4}, rng);

  SUBCASE("zero H-examiner scores 0.5") {
    DanModel m = small_model(ViewMode::Dual, AlignerKind::HAdversarial);
    zero_ffn(m.d_subj);
    Tensor score = examine(f, m, ViewId::Subj);
    CHECK(score.shape() == std::vector<int>{2});
    CHECK(score.at(0) == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("zero W-critic scores 0.0") {
    DanModel m = small_model(ViewMode::Dual, AlignerKind::Wasserstein);
    zero_ffn(m.d_subj);
    CHECK(examine(f, m, ViewId::Subj).value() == 0.0);
  }
  SUBCASE("identical features give identical scores") {
    DanModel m = small_model(ViewMode::Dual, AlignerKind::HAdversarial);
    Tensor s1 = examine(f, m, ViewId::Obj);
    Tensor s2 = examine(f, m, ViewId::Obj);
    CHECK(s1.at(0) == s2.at(0));
  }
  SUBCASE("rejected without an adversarial aligner") {
    DanModel none = small_model(ViewMode::Dual, AlignerKind::None);
    DanModel coral_model = small_model(ViewMode::Dual, AlignerKind::Coral);
    CHECK_THROWS_AS(examine(f, none, ViewId::Subj), ConfigError);
    CHECK_THROWS_AS(examine(f, coral_model, ViewId::Subj), ConfigError);
  }
}

TEST_CASE("view isolation: auxiliary losses never touch the other view") {
  DanModel m = small_model(ViewMode::Dual, AlignerKind::HAdversarial);
  std::vector<int> tokens{1, 3, 2};

  Tape tape;
  Tape::Scope scope(tape);
  m.watch_all(tape);
  auto [f_subj, f_obj] = encode_views(tokens, m);
  Tensor l_subj = nll({auxiliary_predict(f_subj, m.c_subj)}, {1}, 2);
  tape.backward(l_subj);

  for (ParamGroup g : {ParamGroup::EncObj, ParamGroup::CObj, ParamGroup::CStance, ParamGroup::Gate,
                       ParamGroup::DSubj, ParamGroup::DObj}) {
    for (auto& [name, t] : m.group_params(g)) {
      INFO("group parameter ", name);
      for (int64_t i = 0; i < t.size(); ++i) CHECK(t.grad_at(static_cast<int>(i)) == 0.0);
    }
  }
  // and the subjective side did receive gradient
  bool any = false;
  for (auto& [name, t] : m.group_params(ParamGroup::EncSubj))
    for (int64_t i = 0; i < t.size(); ++i) any = any || t.grad_at(static_cast<int>(i)) != 0.0;
  CHECK(any);
}

TEST_CASE("mode consistency: parameter counts") {
  auto encoder_count = [](int d_e, int d_h) {
    return 2 * (4 * d_h * d_e + 4 * d_h * d_h + 4 * d_h) + d_h * 2 * d_h + d_h;
  };
  auto ffn_count = [](int in, int hidden, int out) { return hidden * in + hidden + out * hidden + out; };
  const int d_e = 3, d_h = 4, d_f = 5;

  DanModel so = small_model(ViewMode::Single, AlignerKind::None);
  CHECK(so.param_count() == encoder_count(d_e, d_h) + ffn_count(d_h, d_f, 3));

  DanModel dann = small_model(ViewMode::Single, AlignerKind::HAdversarial);
  CHECK(dann.param_count() == so.param_count() + ffn_count(d_h, d_f, 2));

  DanModel wdgrl = small_model(ViewMode::Single, AlignerKind::Wasserstein);
  CHECK(wdgrl.param_count() == so.param_count() + ffn_count(d_h, d_f, 1));

  // dual mode adds exactly one encoder, two auxiliary heads, one examiner,
  // and the gate
  DanModel d_dann = small_model(ViewMode::Dual, AlignerKind::HAdversarial);
  CHECK(d_dann.param_count() == dann.param_count() + encoder_count(d_e, d_h) + 2 * ffn_count(d_h, d_f, 2) +
                                    ffn_count(d_h, d_f, 2) + (d_h * 2 * d_h + d_h));

  DanModel subj_only = small_model(ViewMode::DualSubjOnly, AlignerKind::HAdversarial);
  CHECK(subj_only.param_count() == d_dann.param_count() - ffn_count(d_h, d_f, 2) - ffn_count(d_h, d_f, 2));
}

TEST_CASE("checkpoint round-trips bit-exactly on the float payload") {
  const char* path1 = "/tmp/dan_test_ckpt1.bin";
  const char* path2 = "/tmp/dan_test_ckpt2.bin";
  DanModel m = small_model(ViewMode::Dual, AlignerKind::Wasserstein, 99);
  save_checkpoint(m, path1);
  DanModel loaded = load_checkpoint(path1, small_table());
  CHECK(loaded.spec.view_mode == m.spec.view_mode);
  CHECK(loaded.spec.aligner == m.spec.aligner);
  CHECK(loaded.spec.d_h == m.spec.d_h);

  // loaded values equal the float32 projection of the originals
  auto a = m.named_params();
  auto b = loaded.named_params();
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].first == b[i].first);
    for (int64_t j = 0; j < a[i].second.size(); ++j)
      CHECK(static_cast<float>(a[i].second.data()[j]) == static_cast<float>(b[i].second.data()[j]));
  }

  // a second save must reproduce the payload byte for byte
  save_checkpoint(loaded, path2);
  std::ifstream f1(path1, std::ios::binary), f2(path2, std::ios::binary);
  std::string c1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string c2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(c1 == c2);
  std::remove(path1);
  std::remove(path2);
}

TEST_CASE("checkpoint load validates the embedding table") {
  const char* path = "/tmp/dan_test_ckpt3.bin";
  DanModel m = small_model(ViewMode::Single, AlignerKind::None);
  save_checkpoint(m, path);
  auto wrong = std::make_shared<EmbeddingTable>(make_embedding_table({{"x", {1.0, 2.0}}}));  // d_e = 2, not 3
  CHECK_THROWS_AS(load_checkpoint(path, wrong), DataError);
  std::remove(path);
}
