#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <fstream>

#include "rrk/checkpoint.hpp"
#include "rrk/trainer.hpp"
#include "rrk/transformer.hpp"
#include "support.hpp"

using namespace rrk;

namespace {

Matrix forward(const Checkpoint& ckpt, const Matrix& input, const AttentionMask& mask) {
  Tape tape(false);
  ParamBinder params(tape, ckpt);
  return decoder_forward(params, tape.constant(input), mask).final_hidden.value();
}

Matrix forward(const Checkpoint& ckpt, const Matrix& input) {
  return forward(ckpt, input, AttentionMask::causal(static_cast<int>(input.rows())));
}

}  // namespace

TEST_SUITE("transformer") {
  TEST_CASE("config invariants") {
    ModelConfig c;
    CHECK(c.violations().empty());
    CHECK(c.rerank_input_length() == 32);
    CHECK(c.lora_scale() == 2.0);
    c.n_heads = 3;
    CHECK_FALSE(c.violations().empty());
    CHECK_THROWS(c.validate());
  }

  TEST_CASE("init is deterministic per seed") {
    const auto c = test::tiny_config();
    const auto a = init_checkpoint(c, {true, true, false});
    const auto b = init_checkpoint(c, {true, true, false});
    CHECK(a.params == b.params);
    auto c2 = c;
    c2.seed = 8;
    CHECK_FALSE(init_checkpoint(c2, {}).params == a.params);
  }

  TEST_CASE("changing a padded position leaves the valid outputs bit-identical") {
    const auto ckpt = init_checkpoint(test::tiny_config(), {});
    Rng rng(1);
    Matrix x = test::random_matrix(rng, 10, 16);
    const auto mask = AttentionMask::causal(10, 7);
    const Matrix base = forward(ckpt, x, mask);
    x.row(8) = test::random_matrix(rng, 1, 16, 5.0);
    const Matrix changed = forward(ckpt, x, mask);
    CHECK(base.topRows(7) == changed.topRows(7));
  }

  TEST_CASE("single position is defined") {
    const auto ckpt = init_checkpoint(test::tiny_config(), {});
    Rng rng(2);
    CHECK(forward(ckpt, test::random_matrix(rng, 1, 16)).allFinite());
  }

  TEST_CASE("perturbing position j leaves earlier positions unchanged") {
    const auto ckpt = init_checkpoint(test::tiny_config(), {});
    Rng rng(3);
    for (int trial = 0; trial < 5; ++trial) {
      Matrix x = test::random_matrix(rng, 12, 16);
      const Matrix base = forward(ckpt, x);
      const auto j = static_cast<Eigen::Index>(rng.range(1, 11));
      x.row(j).array() += 1.0;
      const Matrix changed = forward(ckpt, x);
      CHECK(base.topRows(j) == changed.topRows(j));
      CHECK_FALSE(base.row(j) == changed.row(j));
    }
  }

  TEST_CASE("sequence longer than max_seq_len is rejected") {
    const auto ckpt = init_checkpoint(test::tiny_config(), {});
    CHECK_THROWS(forward(ckpt, Matrix::Zero(41, 16)));
  }

  TEST_CASE("zero-B adapters are forward-identical to the base") {
    const auto base = init_checkpoint(test::tiny_config(), {});
    auto adapted = base;
    add_lora_adapters(adapted, 5);
    CHECK(adapted.has("layers.0.attn.q.w.lora_a"));
    CHECK(adapted.has("layers.1.attn.v.w.lora_b"));
    CHECK_FALSE(adapted.has("layers.0.attn.k.w.lora_a"));
    Rng rng(4);
    const Matrix x = test::random_matrix(rng, 9, 16);
    CHECK(forward(base, x) == forward(adapted, x));
    const Matrix& w = base.at("layers.0.attn.q.w");
    CHECK(apply_lora(w, adapted.at("layers.0.attn.q.w.lora_a"), adapted.at("layers.0.attn.q.w.lora_b"), 16.0, 8) == w);
  }

  TEST_CASE("adapter shapes follow the adapted weight") {
    auto ckpt = init_checkpoint(test::tiny_config(), {true, false, false});
    for (const auto& [name, m] : ckpt.params) {
      if (!name.ends_with(".lora_a")) continue;
      const std::string w = name.substr(0, name.size() - 7);
      CHECK(m.rows() == 8);
      CHECK(m.cols() == ckpt.at(w).cols());
      CHECK(ckpt.at(w + ".lora_b").rows() == ckpt.at(w).rows());
      CHECK(ckpt.at(w + ".lora_b").cols() == 8);
    }
    CHECK_THROWS(apply_lora(Matrix::Zero(4, 4), Matrix::Zero(2, 4), Matrix::Zero(4, 3), 1.0, 2));
  }

  TEST_CASE("full-rank adapters match the dense delta") {
    Rng rng(5);
    const Matrix w = test::random_matrix(rng, 6, 6);
    const Matrix a = test::random_matrix(rng, 6, 6), b = test::random_matrix(rng, 6, 6);
    Matrix oracle = w;
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j)
        for (int r = 0; r < 6; ++r) oracle(i, j) += (12.0 / 6.0) * b(i, r) * a(r, j);
    CHECK((apply_lora(w, a, b, 12.0, 6) - oracle).cwiseAbs().maxCoeff() < 1e-12);

    // The graph path uses the same effective weight.
    auto cfg = test::tiny_config();
    cfg.lora_rank = 16;
    cfg.lora_alpha = 8.0;
    auto ckpt = init_checkpoint(cfg, {true, false, false});
    for (auto& [name, m] : ckpt.params)
      if (name.ends_with(".lora_b")) m = test::random_matrix(rng, m.rows(), m.cols(), 0.1);
    auto dense = ckpt;
    for (auto it = dense.params.begin(); it != dense.params.end();) {
      if (it->first.ends_with(".lora_a")) {
        const std::string wname = it->first.substr(0, it->first.size() - 7);
        dense.params[wname] = apply_lora(ckpt.at(wname), ckpt.at(wname + ".lora_a"), ckpt.at(wname + ".lora_b"),
                                         cfg.lora_alpha, cfg.lora_rank);
      }
      ++it;
    }
    std::erase_if(dense.params, [](const auto& kv) { return is_lora_param(kv.first); });
    const Matrix x = test::random_matrix(rng, 7, 16);
    CHECK((forward(ckpt, x) - forward(dense, x)).cwiseAbs().maxCoeff() < 1e-10);
  }

  TEST_CASE("frozen base receives no gradient") {
    Rng rng(6);
    auto ckpt = init_checkpoint(test::tiny_config(), {true, true, false});
    for (auto& [name, m] : ckpt.params)
      if (name.ends_with(".lora_b")) m = test::random_matrix(rng, m.rows(), m.cols(), 0.1);
    Tape tape;
    ParamBinder params(tape, ckpt, trainable_predicate(TrainableSet::LoraHead));
    Var x = tape.constant(test::random_matrix(rng, 6, 16));
    Var h = decoder_forward(params, x, AttentionMask::causal(6)).final_hidden;
    Var s = ops::linear(ops::slice_rows(h, 5, 1), params("head.w"), params("head.b"));
    tape.backward(ops::sum_squares(s));
    std::size_t trained = 0;
    for (const auto& [name, var] : params.bound()) {
      const bool expect = is_lora_param(name) || is_head_param(name);
      CHECK(tape.requires_grad(var) == expect);
      if (!expect) continue;
      ++trained;
      CHECK(var.grad().size() > 0);
    }
    CHECK(trained == 2 * 2 * 2 + 2);
  }

  TEST_CASE("truncation") {
    const auto c = test::tiny_config();
    const auto ckpt = init_checkpoint(c, {true, true, false});
    Rng rng(7);
    const Matrix x = test::random_matrix(rng, 8, 16);
    CHECK(forward(truncate_layers(ckpt, c.n_layers), x) == forward(ckpt, x));
    const auto half = truncate_layers(ckpt, 1);
    CHECK(half.config.n_layers == 1);
    CHECK_FALSE(half.has("layers.1.ln1.g"));
    CHECK(half.has("head.w"));
    CHECK_THROWS(truncate_layers(ckpt, 0));
    CHECK_THROWS(truncate_layers(ckpt, 3));
  }

  TEST_CASE("half depth forward is at most 0.65 of full depth time") {
    const auto full = init_checkpoint(ModelConfig{}, {true, true, false});
    const auto half = truncate_layers(full, 2);
    Rng rng(8);
    const Matrix x = test::random_matrix(rng, 32, 64);
    auto time_once = [&](const Checkpoint& ckpt) {
      const auto t0 = std::chrono::steady_clock::now();
      for (int i = 0; i < 20; ++i) forward(ckpt, x);
      return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };
    auto median = [](std::vector<double> v) {
      std::sort(v.begin(), v.end());
      return v[v.size() / 2];
    };
    // Samples alternate between the two models so machine drift hits both.
    time_once(full);
    time_once(half);
    std::vector<double> full_samples, half_samples;
    for (int rep = 0; rep < 31; ++rep) {
      full_samples.push_back(time_once(full));
      half_samples.push_back(time_once(half));
    }
    const double t_full = median(full_samples), t_half = median(half_samples);
    MESSAGE("full " << t_full << " s, half " << t_half << " s");
    CHECK(t_half <= 0.65 * t_full);
  }
}

TEST_SUITE("checkpoint") {
  TEST_CASE("round-trip is bit-identical") {
    test::TempDir dir("ckpt");
    auto ckpt = init_checkpoint(test::tiny_config(), {true, true, true});
    ckpt.metadata["note"] = "x y";
    save_checkpoint(ckpt, dir / "a.ckpt");
    const auto loaded = load_checkpoint(dir / "a.ckpt");
    CHECK(loaded.config == ckpt.config);
    CHECK(loaded.params == ckpt.params);
    CHECK(loaded.metadata == ckpt.metadata);
    CHECK(checkpoint_hash(loaded) == checkpoint_hash(ckpt));
  }

  TEST_CASE("hash ignores metadata and sees parameters") {
    auto ckpt = init_checkpoint(test::tiny_config(), {});
    const auto h = checkpoint_hash(ckpt);
    ckpt.metadata["role"] = "other";
    CHECK(checkpoint_hash(ckpt) == h);
    ckpt.params["ln_f.b"](0, 0) = 1e-300;
    CHECK(checkpoint_hash(ckpt) != h);
  }

  TEST_CASE("corrupt files are rejected") {
    test::TempDir dir("ckpt");
    {
      std::ofstream out(dir / "bad.ckpt", std::ios::binary);
      out << "NOTACKPT";
    }
    CHECK_THROWS(load_checkpoint(dir / "bad.ckpt"));
    save_checkpoint(init_checkpoint(test::tiny_config(), {}), dir / "a.ckpt");
    std::filesystem::resize_file(dir / "a.ckpt", std::filesystem::file_size(dir / "a.ckpt") - 5);
    CHECK_THROWS(load_checkpoint(dir / "a.ckpt"));
  }

  TEST_CASE("config entries round-trip") {
    auto c = test::tiny_config();
    c.lora_alpha = 3.25;
    c.seed = 99;
    CHECK(config_from_entries(config_entries(c)) == c);
  }
}
