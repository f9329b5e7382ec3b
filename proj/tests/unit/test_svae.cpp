#include "tactile/errors.hpp"
#include "tactile/rng.hpp"
#include "tactile/svae.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>

using namespace tactile;

namespace {

LabeledSet tiny_set(size_t n, uint64_t seed, int side = 16) {
    FingerPlantConfig cfg;
    cfg.image_height = cfg.image_width = side;
    std::mt19937_64 rng(seed);
    LabeledSet s;
    for (size_t i = 0; i < n; ++i) {
        ContactPose p{uniform(rng, 0, 5), uniform(rng, -5, 5), uniform(rng, -kPi, kPi)};
        s.images.push_back(render(deform(p, cfg), cfg, DomainTag::land(), false, i));
        s.wrenches.push_back(plant_wrench(p, cfg));
    }
    return s;
}

Checkpoint random_checkpoint(uint64_t seed) {
    Checkpoint ck;
    ck.arch = SVAEArchitecture::micro();
    ck.params = Svae(ck.arch).init_params<float>(seed);
    ck.meta.epochs = 3;
    ck.meta.seed = seed;
    ck.meta.normalizer.mean = {0.1, 2.0, -0.3, 4.0, 5.5, -6.0};
    ck.meta.normalizer.stddev = {1.5, 2.5, 0.7, 100.0, 200.0, 300.0};
    EpochRecord e;
    e.epoch = 0;
    e.learning_rate = 5e-5;
    e.train = {0.1, 0.2, 0.3, 0.4};
    e.validation = {0.5, 0.6, 0.7, 0.8};
    e.validation_mean_r2 = 0.25;
    ck.meta.history.push_back(e);
    ck.meta.recon_mse_ceiling = 0.0123;
    return ck;
}

} // namespace

TEST_SUITE("svae") {

TEST_CASE("loss weights") {
    LossConfig c{1.0, 0.1};
    CHECK(c.recon_weight() == 0.5);
    CHECK(c.pred_weight() == 0.5);
    LossConfig h{100.0, 0.1};
    CHECK(h.recon_weight() == doctest::Approx(100.0 / 101.0).epsilon(1e-15));
    CHECK(h.pred_weight() == doctest::Approx(1.0 / 101.0).epsilon(1e-15));
    std::mt19937_64 rng(1);
    for (int i = 0; i < 1000; ++i) {
        LossConfig r{std::exp(uniform(rng, -10, 10)), 0.1};
        REQUIRE(r.recon_weight() + r.pred_weight() == 1.0);
    }
    CHECK_THROWS_AS((LossConfig({-1.0, 0.1}).validate()), ConfigError);
    CHECK_THROWS_AS((LossConfig({1.0, -0.1}).validate()), ConfigError);
    CHECK(LossConfig{0, 0, LossMode::PredictionOnly}.kl_weight() == 0.0);
    CHECK(LossConfig{5, 0.1, LossMode::ReconstructionOnly}.pred_weight() == 0.0);
    for (auto m : {LossMode::Supervised, LossMode::PredictionOnly, LossMode::ReconstructionOnly})
        CHECK(loss_mode_from_string(to_string(m)) == m);
}

TEST_CASE("loss breakdown identity") {
    const Svae net(SVAEArchitecture::micro());
    auto p = net.init_params<double>(3);
    std::mt19937_64 rng(3);
    Tensor<double> x({2, 1, 16, 16}), y({2, 6}), eps({2, 4});
    for (size_t i = 0; i < x.numel(); ++i) x[i] = uniform01(rng);
    for (size_t i = 0; i < y.numel(); ++i) y[i] = standard_normal(rng);
    for (size_t i = 0; i < eps.numel(); ++i) eps[i] = standard_normal(rng);
    for (double alpha : {0.0, 1.0, 10.0}) {
        LossConfig cfg{alpha, 0.1};
        const auto l = net.loss(p, x, y, eps, cfg);
        CHECK(l.total == doctest::Approx(alpha / (1 + alpha) * l.recon + 1 / (1 + alpha) * l.pred + 0.1 * l.kl));
        CHECK(l.recon >= 0);
        CHECK(l.pred >= 0);
        CHECK(l.kl >= 0);
    }
    // KL term is the per-coordinate mean of the closed form, averaged over the batch.
    {
        const auto [mu, lv] = net.encode(p, x);
        double kl = 0;
        for (size_t s = 0; s < 2; ++s)
            for (size_t j = 0; j < 4; ++j) {
                const double m = mu[s * 4 + j], v = lv[s * 4 + j];
                kl += 0.5 * (m * m + std::exp(v) - 1 - v);
            }
        CHECK(net.loss(p, x, y, eps, {1.0, 0.1}).kl == doctest::Approx(kl / 8).epsilon(1e-12));
    }
    const auto nob = net.loss(p, x, y, eps, {1.0, 0.0});
    CHECK(nob.total == doctest::Approx(0.5 * nob.recon + 0.5 * nob.pred).epsilon(1e-15));
    CHECK_THROWS_AS((net.loss(p, x, Tensor<double>({2, 5}), eps, {})), ShapeError);
}

TEST_CASE("full objective gradient on micro architectures") {
    const Svae net(SVAEArchitecture::micro());
    const double h = 1e-5;
    for (uint64_t seed = 1; seed <= 4; ++seed) {
        auto p = net.init_params<double>(seed);
        CHECK(p.scalar_count() <= 5000);
        std::mt19937_64 rng(seed * 31);
        for (const auto& [name, t] : p.entries())
            if (name.back() == 'b')
                for (size_t i = 0; i < t.numel(); ++i) p.mutable_at(name)[i] = uniform(rng, -0.2, 0.2);
        Tensor<double> x({2, 1, 16, 16}), y({2, 6}), eps({2, 4});
        for (size_t i = 0; i < x.numel(); ++i) x[i] = uniform01(rng);
        for (size_t i = 0; i < y.numel(); ++i) y[i] = standard_normal(rng);
        for (size_t i = 0; i < eps.numel(); ++i) eps[i] = standard_normal(rng);
        const LossConfig cfg{0.7, 0.3};
        auto g = p.zeros_like();
        net.loss(p, x, y, eps, cfg, &g);
        const auto base = net.relu_mask(p, x, eps);
        double worst = 0;
        size_t checked = 0;
        // Every fourth coordinate keeps the unit run short; the acceptance
        // check covers all of them.
        for (const auto& [name, t] : p.entries()) {
            for (size_t i = 0; i < t.numel(); i += 4) {
                const double orig = t[i];
                p.mutable_at(name)[i] = orig + h;
                const double lp = net.loss(p, x, y, eps, cfg).total;
                bool smooth = net.relu_mask(p, x, eps) == base;
                p.mutable_at(name)[i] = orig - h;
                const double lm = net.loss(p, x, y, eps, cfg).total;
                smooth = smooth && net.relu_mask(p, x, eps) == base;
                p.mutable_at(name)[i] = orig;
                if (!smooth) continue;
                const double fd = (lp - lm) / (2 * h), an = g.at(name)[i];
                worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6}));
                ++checked;
            }
        }
        CAPTURE(seed);
        CHECK(checked > 150);
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("zero-initialised heads") {
    Checkpoint ck = random_checkpoint(1);
    for (const auto& [name, t] : ck.params.entries())
        if (name.rfind("reg.", 0) == 0 || name.rfind("dec.", 0) == 0) ck.params.mutable_at(name).fill(0.0f);
    SvaeModel m(ck);
    const std::vector<float> z(4, 0.0f);
    const TactileImage img = m.decode_image(z);
    for (float v : img.pixels) CHECK(v == 0.5f);
    const Wrench w = m.predict_wrench(std::vector<float>{0.3f, -1.0f, 2.0f, 0.0f});
    const auto v = w.values();
    for (size_t a = 0; a < 6; ++a) CHECK(v[a] == doctest::Approx(ck.meta.normalizer.mean[a]));
    CHECK_THROWS_AS((void)m.decode_image(std::vector<float>(3)), ShapeError);
    CHECK_THROWS_AS((void)m.predict_wrench(std::vector<float>(5)), ShapeError);
}

TEST_CASE("encoding is deterministic and batch-consistent") {
    SvaeModel m(random_checkpoint(5));
    const LabeledSet s = tiny_set(5, 2);
    const auto a = m.encode(s.images[0]);
    const auto b = m.encode(s.images[0]);
    CHECK(a.mu == b.mu);
    CHECK(a.logvar == b.logvar);
    CHECK(a.mu.size() == 4);
    const auto batch = m.encode_batch(s.images);
    for (size_t i = 0; i < s.size(); ++i) {
        const auto single = m.encode(s.images[i]);
        for (size_t k = 0; k < single.mu.size(); ++k) {
            CHECK(batch[i].mu[k] == doctest::Approx(single.mu[k]).epsilon(1e-5).scale(1e-6));
            CHECK(batch[i].logvar[k] == doctest::Approx(single.logvar[k]).epsilon(1e-5).scale(1e-6));
        }
    }
    CHECK_THROWS_AS((void)m.encode(TactileImage(8, 8)), ShapeError);
}

TEST_CASE("default architecture latent size") {
    SVAEArchitecture arch;
    Checkpoint ck;
    ck.arch = arch;
    ck.params = Svae(arch).init_params<float>(1);
    SvaeModel m(ck);
    FingerPlantConfig cfg;
    const auto code = m.encode(render(deform({2, 0, 0}, cfg), cfg, DomainTag::land(), false, 0));
    CHECK(code.mu.size() == 32);
    CHECK(code.logvar.size() == 32);
}

TEST_CASE("label normaliser") {
    const LabeledSet s = tiny_set(40, 8);
    const auto n = LabelNormalizer::fit(s.wrenches);
    for (const auto& w : s.wrenches) {
        const auto back = n.denormalize(n.normalize(w)).values();
        const auto v = w.values();
        for (size_t a = 0; a < 6; ++a) CHECK(back[a] == doctest::Approx(v[a]).epsilon(1e-6).scale(1e-9));
    }
    CHECK_THROWS_AS((LabelNormalizer::fit({})), DataError);
}

TEST_CASE("checkpoint round trip") {
    testutil::TempDir dir("ckpt");
    const Checkpoint ck = random_checkpoint(11);
    save_checkpoint(ck, dir / "m.svae");
    const Checkpoint back = load_checkpoint(dir / "m.svae");
    CHECK(back == ck);
    CHECK(checkpoint_bytes(back) == checkpoint_bytes(ck));
    const auto bytes = checkpoint_bytes(ck);
    CHECK(bytes[0] == 'S');
    CHECK(bytes[1] == 'V');
    CHECK(bytes[2] == 'A');
    CHECK(bytes[3] == 'E');
    CHECK(bytes[4] == 1);
    CHECK(bytes[5] == 0);
}

TEST_CASE("checkpoint corruption is reported") {
    const auto bytes = checkpoint_bytes(random_checkpoint(2));
    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(checkpoint_from_bytes(bad), FormatError);
    bad = bytes;
    bad[4] = 9;
    CHECK_THROWS_AS(checkpoint_from_bytes(bad), FormatError);
    CHECK_THROWS_AS(checkpoint_from_bytes(std::span(bytes).first(10)), FormatError);

    // Cut inside the last tensor of the payload.
    uint64_t header_len = 0;
    for (int i = 0; i < 8; ++i) header_len |= uint64_t(bytes[8 + i]) << (8 * i);
    const size_t payload = 16 + header_len;
    REQUIRE(bytes.size() > payload + 8);
    try {
        checkpoint_from_bytes(std::span(bytes).first(bytes.size() - 2));
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("reg.") != std::string::npos);
    }
    auto extra = bytes;
    extra.push_back(0);
    CHECK_THROWS_AS(checkpoint_from_bytes(extra), FormatError);
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/dir/m.svae"), IoError);
}

TEST_CASE("training plumbing and determinism") {
    const LabeledSet tr = tiny_set(10, 1), va = tiny_set(4, 2);
    TrainHyper h;
    h.epochs = 1;
    h.batch_size = 4;
    const Checkpoint ck = train(tr, va, SVAEArchitecture::micro(), {}, h);
    CHECK(ck.meta.history.size() == 1);
    CHECK(checkpoint_from_bytes(checkpoint_bytes(ck)) == ck);

    h.epochs = 3;
    const Checkpoint a = train(tr, va, SVAEArchitecture::micro(), {}, h);
    const Checkpoint b = train(tr, va, SVAEArchitecture::micro(), {}, h);
    CHECK(a.params == b.params);
    for (size_t e = 0; e < a.meta.history.size(); ++e) CHECK(a.meta.history[e].train.total == b.meta.history[e].train.total);
    h.seed = 2;
    CHECK_FALSE(train(tr, va, SVAEArchitecture::micro(), {}, h).params == a.params);

    CHECK_THROWS_AS((train(LabeledSet{}, va, SVAEArchitecture::micro(), {}, h)), DataError);
    CHECK_THROWS_AS((train(tr, LabeledSet{}, SVAEArchitecture::micro(), {}, h)), DataError);
}

TEST_CASE("decoder pixel bias starts at the training mean image") {
    const LabeledSet tr = tiny_set(12, 5), va = tiny_set(4, 6);
    TrainHyper h;
    h.epochs = 1;
    h.batch_size = 4;
    h.adam.learning_rate = 1e-12;
    const Checkpoint ck = train(tr, va, SVAEArchitecture::micro(), {}, h);
    const auto& b = ck.params.at("dec.pixel.b");
    REQUIRE(b.numel() == 256);
    for (size_t i = 0; i < b.numel(); ++i) {
        double m = 0;
        for (const auto& img : tr.images) m += img.pixels[i];
        m = std::min(0.99, std::max(0.01, m / 12));
        CHECK(b[i] == doctest::Approx(std::log(m) - std::log1p(-m)).epsilon(1e-5));
    }
}

TEST_CASE("training reduces validation loss") {
    const LabeledSet tr = tiny_set(64, 3), va = tiny_set(16, 4);
    TrainHyper h;
    h.epochs = 8;
    h.batch_size = 8;
    h.adam.learning_rate = 1e-3;
    const Checkpoint ck = train(tr, va, SVAEArchitecture::micro(), {}, h);
    CHECK(ck.meta.history.back().validation.total < ck.meta.initial_validation.total);
    CHECK(ck.meta.recon_mse_ceiling >= ck.meta.train_recon_mse);
}

} // TEST_SUITE
