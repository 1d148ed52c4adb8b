#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "percamp/error.hpp"
#include "percamp/pipeline.hpp"

using namespace percamp;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

ModelParams small() {
    ModelParams p;
    p.n = 300;
    p.ell_under = 10;
    p.sde_paths = 2000;
    p.normalizer_samples = 1 << 14;
    p.nx = 1025;
    return p;
}

}  // namespace

TEST(Pipeline, OracleGammaDeterministicArtifacts) {
    const fs::path root = fs::temp_directory_path() / "percamp_pipeline_test";
    fs::remove_all(root);
    fs::create_directories(root);
    const fs::path gfile = root / "gamma_in.json";
    save_fop(Fop({0.48474, 0.59813, 1.0}, {0.0, 0.5477, 1.0}), gfile.string());
    ModelParams p = small();
    p.gamma_file = gfile.string();
    const PipelineReport a = run_pipeline(p, (root / "a").string());
    const PipelineReport b = run_pipeline(p, (root / "b").string());
    EXPECT_EQ(a.json["gamma_source"], "oracle-supplied γ");
    for (const char* f : {"config.json", "gamma.json", "pde.cache", "se.json", "amp.json", "amp.bin", "round.json",
                          "round.bin"})
        EXPECT_EQ(slurp(root / "a" / f), slurp(root / "b" / f)) << f;
    Json ra = a.json, rb = b.json;
    ra.erase("wall_times");
    rb.erase("wall_times");
    EXPECT_EQ(ra.dump(), rb.dump());
    EXPECT_LE(a.json["rounding"]["solution"]["kkt_residual"].get<double>(), 1e-8);
    EXPECT_EQ(a.json["rounding"]["verify"]["violations"].get<int>(), 0);
    p.seed = 2;
    const PipelineReport c = run_pipeline(p, (root / "c").string());
    EXPECT_NE(slurp(root / "a" / "amp.bin"), slurp(root / "c" / "amp.bin"));
    fs::remove_all(root);
}

TEST(Pipeline, StageErrorsCarryTag) {
    ModelParams p = small();
    p.gamma_file = "/nonexistent/gamma.json";
    try {
        run_pipeline(p, (fs::temp_directory_path() / "percamp_pipeline_err").string());
        FAIL() << "expected a stage error";
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage, "variational");
    }
    fs::remove_all(fs::temp_directory_path() / "percamp_pipeline_err");
}

TEST(RsScan, CapacityRows) {
    const std::vector<double> ks{-1.0, -0.5, 0.0, 0.5};
    const auto rows = rs_capacity_scan(ks, {0.5});
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_NEAR(rows[2].alpha_rs, 2.0, 1e-12);
    for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_LT(rows[i].alpha_rs, rows[i - 1].alpha_rs);
    EXPECT_NEAR(rows[0].values[0], gardner_rs(0.5 * rows[0].alpha_rs, -1.0).value, 1e-9);
    const std::string csv = scan_csv(rows, {0.5});
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "kappa,alpha_rs,second_moment,value_at_0.5,q_at_0.5");
}
