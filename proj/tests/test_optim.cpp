#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "evlab/checkpoint.hpp"
#include "evlab/optim.hpp"
#include "evlab/tensor.hpp"

#include <cstdio>
#include <filesystem>
#include <stdexcept>

using namespace evlab;

TEST_CASE("adamw paper defaults") {
    AdamW::Config cfg;
    CHECK(cfg.lr == 5e-6);
    CHECK(cfg.beta1 == 0.9);
    CHECK(cfg.beta2 == 0.999);
}

TEST_CASE("zero gradient with zero weight decay is a fixed point") {
    Tensor p = Tensor::param({3}, {1.0, -2.0, 0.5});
    p.impl()->ensure_grad(); // all-zero gradient
    AdamW opt({{"p", p}});
    opt.step();
    CHECK(p.values() == std::vector<double>{1.0, -2.0, 0.5});
}

TEST_CASE("single hand-computed adamw step") {
    // p=1, g=1, lr=0.1, wd=0: mhat=1, vhat=1 -> p ~= 1 - 0.1/(1+eps) ~= 0.9
    Tensor p = Tensor::param({1}, {1.0});
    p.impl()->ensure_grad();
    p.impl()->grad[0] = 1.0;
    AdamW::Config cfg;
    cfg.lr = 0.1;
    cfg.weight_decay = 0.0;
    AdamW opt({{"p", p}}, cfg);
    opt.step();
    CHECK(p.values()[0] == doctest::Approx(0.9).epsilon(1e-6));
    CHECK(opt.step_count() == 1);
}

TEST_CASE("decoupled weight decay shrinks parameters independently of gradients") {
    Tensor p = Tensor::param({1}, {2.0});
    p.impl()->ensure_grad(); // zero grad
    AdamW::Config cfg;
    cfg.lr = 0.5;
    cfg.weight_decay = 0.1;
    AdamW opt({{"p", p}}, cfg);
    opt.step();
    CHECK(p.values()[0] == doctest::Approx(2.0 * (1.0 - 0.05)));
}

TEST_CASE("non-finite gradient rejected with parameter name") {
    Tensor p = Tensor::param({2}, {1.0, 1.0});
    p.impl()->ensure_grad();
    p.impl()->grad[1] = std::numeric_limits<double>::quiet_NaN();
    AdamW opt({{"conv.weight", p}});
    try {
        opt.step();
        FAIL("expected rejection");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("conv.weight") != std::string::npos);
    }
}

TEST_CASE("checkpoint round trip preserves bytes") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "evlab_ckpt_test";
    fs::create_directories(dir);
    const auto path = (dir / "w.evdw").string();

    Tensor a = Tensor::param({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor b = Tensor::param({1}, {0.25});
    ParamList params = {{"layer.w", a}, {"layer.b", b}};
    checkpoint::save(path, params);

    auto loaded = checkpoint::load(path);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded.at("layer.w").shape() == Shape{2, 3});
    CHECK(loaded.at("layer.w").values() == a.values());
    CHECK(loaded.at("layer.b").values() == b.values());

    // identical state -> identical bytes
    const auto path2 = (dir / "w2.evdw").string();
    checkpoint::save(path2, params);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    std::string c1((std::istreambuf_iterator<char>(f1)), {});
    std::string c2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(c1 == c2);

    // load_into with shape mismatch rejected
    Tensor wrong = Tensor::param({3, 2}, {0, 0, 0, 0, 0, 0});
    ParamList bad = {{"layer.w", wrong}, {"layer.b", b}};
    CHECK_THROWS_AS(checkpoint::load_into(path, bad), std::runtime_error);

    fs::remove_all(dir);
}

TEST_CASE("truncated checkpoint rejected") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "evlab_ckpt_trunc";
    fs::create_directories(dir);
    const auto path = (dir / "t.evdw").string();
    Tensor a = Tensor::param({4}, {1, 2, 3, 4});
    checkpoint::save(path, {{"a", a}});
    auto size = fs::file_size(path);
    fs::resize_file(path, size - 8);
    CHECK_THROWS_AS(checkpoint::load(path), std::runtime_error);
    fs::remove_all(dir);
}
