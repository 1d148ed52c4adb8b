#include <gtest/gtest.h>

#include "percamp/amp.hpp"

using namespace percamp;

namespace {

struct Point {
    double alpha = 20.0, kappa = -1.5;
    Fop g{{0.48474, 0.59813, 1.0}, {0.0, 0.5477, 1.0}};
    PdeSolution sol;
    Schedule sched;
    Point() {
        const PdeSolution coarse = solve(g, kappa, PdeGridSpec::coarse(g, kappa));
        const Schedule c = schedule_constants(coarse, alpha, 40);
        sol = solve(g, kappa, PdeGridSpec::make(g, kappa, 1e-3, 2049, c.q_levels));
        sched = build_schedule(sol, alpha, 40);
        discrete_normalizers(sol, sched, 1 << 16, 1);
    }
};

const Point& point() {
    static const Point p;
    return p;
}

}  // namespace

TEST(Amp, RsStageTracksStateEvolution) {
    const Point& p = point();
    const Disorder dis = generate_disorder(1500, p.alpha, 3);
    const AmpTrace rs = rs_amp(dis, p.sol, 20);
    ASSERT_EQ(rs.u_hist.size(), 21u);
    const OverlapReport ov = rs_overlaps(rs, p.sched, 10);
    EXPECT_LE(ov.max_norm_gap, 0.06);
    EXPECT_LE(ov.max_overlap_gap, 0.06);
}

TEST(Amp, DeterministicTrace) {
    const Point& p = point();
    const Disorder dis = generate_disorder(800, p.alpha, 4);
    const AmpTrace a = iamp(dis, p.sol, p.sched, rs_amp(dis, p.sol, 40));
    const AmpTrace b = iamp(dis, p.sol, p.sched, rs_amp(dis, p.sol, 40));
    EXPECT_EQ(a.u_final(), b.u_final());
    EXPECT_EQ(a.au, b.au);
}

TEST(Amp, IncrementalStageReachesTargetRadius) {
    const Point& p = point();
    const Disorder dis = generate_disorder(2000, p.alpha, 5);
    const AmpTrace tr = iamp(dis, p.sol, p.sched, rs_amp(dis, p.sol, 40));
    ASSERT_EQ(tr.au.size(), dis.m);
    EXPECT_NEAR(tr.norm2.back(), tr.target.back(), 0.05);
    const IncrementReport inc = increment_report(tr, p.sched);
    ASSERT_FALSE(inc.increments.empty());
    for (const auto& r : inc.increments) EXPECT_GT(r.mean_sq, 0.0);
}

TEST(Amp, InvalidScheduleRejected) {
    const Point& p = point();
    const Disorder dis = generate_disorder(400, p.alpha, 6);
    const AmpTrace rs = rs_amp(dis, p.sol, 40);
    Schedule s = p.sched;
    s.normalizers.clear();
    EXPECT_ANY_THROW(iamp(dis, p.sol, s, rs));
}
