#include <gtest/gtest.h>

#include <filesystem>

#include "percamp/container.hpp"
#include "percamp/error.hpp"
#include "percamp/pipeline.hpp"

using namespace percamp;
namespace fs = std::filesystem;

TEST(Config, RoundTrip) {
    ModelParams p;
    p.kappa = -0.75;
    p.alpha = 7.5;
    p.n = 1234;
    p.seed = 99;
    p.gamma_file = "g.json";
    p.tol.eps = 0.1;
    const ModelParams q = params_from_json(Json::parse(to_json(p).dump()));
    EXPECT_EQ(to_json(q).dump(), to_json(p).dump());
}

TEST(Config, RejectsUnknownFields) {
    Json j = to_json(ModelParams{});
    j["alhpa"] = 3.0;
    EXPECT_THROW(params_from_json(j), ValidationError);
    Json k = to_json(ModelParams{});
    k["tolerances"]["epsilon"] = 0.1;
    EXPECT_THROW(params_from_json(k), ValidationError);
}

TEST(Config, RejectsWrongVersionAndInvalidValues) {
    Json j = to_json(ModelParams{});
    j["schema_version"] = 99;
    EXPECT_THROW(params_from_json(j), ValidationError);
    Json k = to_json(ModelParams{});
    k["alpha"] = -1.0;
    EXPECT_THROW(params_from_json(k), ValidationError);
    Json l = to_json(ModelParams{});
    l["n"] = "many";
    EXPECT_THROW(params_from_json(l), ValidationError);
    Json m = to_json(ModelParams{});
    m.erase("schema_version");
    EXPECT_THROW(params_from_json(m), ValidationError);
}

TEST(Container, RoundTripAndCorruption) {
    const fs::path p = fs::temp_directory_path() / "percamp_container_test.bin";
    Container c;
    c.params_hash = 42;
    c.kind = "test";
    c.t_nodes = {0.0, 0.5};
    c.meta = "{}";
    c.add("a", {1.0, -2.5, 1e-300});
    write_container(c, p.string());
    const Container r = read_container(p.string());
    EXPECT_EQ(r.params_hash, 42u);
    EXPECT_EQ(r.kind, "test");
    EXPECT_EQ(r.array("a"), c.array("a"));
    EXPECT_THROW(load_vector(p.string()), ValidationError);
    fs::resize_file(p, fs::file_size(p) - 4);
    EXPECT_THROW(read_container(p.string()), ValidationError);
    fs::remove(p);
}

TEST(VectorFile, JsonAndContainer) {
    const fs::path j = fs::temp_directory_path() / "percamp_vec.json";
    write_json(Json{{"u", {1.0, 2.0}}}, j.string());
    EXPECT_EQ(load_vector(j.string()), (std::vector<double>{1.0, 2.0}));
    write_json(Json{{"u", {1.0}}, {"v", 1}}, j.string());
    EXPECT_THROW(load_vector(j.string()), ValidationError);
    fs::remove(j);
    const fs::path b = fs::temp_directory_path() / "percamp_vec.bin";
    Container c;
    c.add("sigma_hat", {3.0, 4.0});
    write_container(c, b.string());
    EXPECT_EQ(load_vector(b.string()), (std::vector<double>{3.0, 4.0}));
    fs::remove(b);
}
