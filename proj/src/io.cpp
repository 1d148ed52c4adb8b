#include "percamp/io.hpp"

#include <fstream>
#include <sstream>

#include "percamp/error.hpp"

namespace percamp {

void reject_unknown(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ValidationError(where + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || it.key() == a;
        if (!ok) throw ValidationError(where + ": unknown field '" + it.key() + "'");
    }
}

Json fop_to_json(const Fop& g) {
    return Json{{"breakpoints", g.breakpoints()}, {"levels", g.levels()}};
}

Fop fop_from_json(const Json& j) {
    reject_unknown(j, {"breakpoints", "levels"}, "fop");
    if (!j.contains("breakpoints") || !j.contains("levels"))
        throw ValidationError("fop: breakpoints and levels are required");
    try {
        return Fop(j.at("breakpoints").get<std::vector<double>>(), j.at("levels").get<std::vector<double>>());
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("fop: ") + e.what());
    }
}

Json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path);
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

void write_json(const Json& j, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + path);
    out << j.dump(2) << '\n';
    if (!out) throw ValidationError("write failed: " + path);
}

void save_fop(const Fop& g, const std::string& path) { write_json(fop_to_json(g), path); }
Fop load_fop(const std::string& path) { return fop_from_json(read_json(path)); }

Json to_json(const VariationalResult& r) {
    return Json{{"gamma", fop_to_json(r.gamma_star)},
                {"value", r.value},
                {"rs_value", r.rs_value},
                {"rs_q", r.rs_q},
                {"q_under", r.q_under},
                {"q_bar", r.q_bar},
                {"grad_residual", r.grad_residual},
                {"max_r1", r.max_r1},
                {"max_r2", r.max_r2},
                {"fixed_point", r.fixed_point},
                {"frsb", r.frsb},
                {"threshold", r.threshold},
                {"min_jump", r.min_jump},
                {"converged", r.converged},
                {"infeasible", r.infeasible},
                {"pieces", r.pieces},
                {"evaluations", r.evaluations}};
}

Json to_json(const Schedule& s) {
    return Json{{"ell_under", s.ell_under},
                {"alpha", s.alpha},
                {"q_under", s.q_under},
                {"q_bar", s.q_bar},
                {"a_seq", s.a_seq},
                {"eps0", s.eps0},
                {"delta", s.delta},
                {"q_levels", s.q_levels},
                {"normalizers", s.normalizers},
                {"normalizer_se", s.normalizer_se},
                {"normalizers_mc", s.normalizers_mc},
                {"normalizers_discrete", s.normalizers_discrete}};
}

Json to_json(const StationarityReport& r) {
    std::vector<double> t, r1, r2, se1, se2;
    for (const auto& c : r.curve) {
        t.push_back(c.t);
        r1.push_back(c.r1);
        r2.push_back(c.r2);
        se1.push_back(c.se1);
        se2.push_back(c.se2);
    }
    return Json{{"t", t},     {"r1", r1},   {"r1_se", se1},
                {"r2", r2},   {"r2_se", se2}, {"endpoint", r.endpoint},
                {"endpoint_se", r.endpoint_se}, {"max_r1", r.max_r1}, {"max_r2", r.max_r2}};
}

Json to_json(const OverlapReport& r) {
    return Json{{"ell_max", r.ell_max},
                {"max_norm_gap", r.max_norm_gap},
                {"max_overlap_gap", r.max_overlap_gap},
                {"gram", r.gram}};
}

Json to_json(const IncrementReport& r) {
    Json inc = Json::array(), cross = Json::array();
    for (const auto& i : r.increments) inc.push_back({{"j", i.j}, {"mean_sq", i.mean_sq}, {"se", i.se_sq}});
    for (const auto& c : r.cross)
        cross.push_back({{"l", c.l}, {"j", c.j}, {"value", c.value}, {"se", c.se}});
    return Json{{"delta", r.delta},
                {"increments", inc},
                {"cross", cross},
                {"max_rel_gap", r.max_rel_gap},
                {"max_sigma", r.max_sigma}};
}

Json to_json(const std::vector<SeCheckRow>& rows) {
    Json out = Json::array();
    for (const auto& r : rows)
        out.push_back({{"psi", r.psi},
                       {"q", r.q},
                       {"empirical", r.empirical},
                       {"predicted", r.predicted},
                       {"gap", r.gap},
                       {"mc_sigma", r.mc_sigma}});
    return out;
}

Json to_json(const RoundedSolution& r) {
    return Json{{"kkt_residual", r.kkt_residual},
                {"primal_infeasibility", r.primal_infeasibility},
                {"complementarity", r.complementarity},
                {"dual_infeasibility", r.dual_infeasibility},
                {"dual_gap", r.dual_gap},
                {"min_margin", r.min_margin},
                {"norm_ratio", r.norm_ratio},
                {"eps3", r.eps3},
                {"distance", r.distance},
                {"iterations", r.iterations},
                {"rounds", r.rounds},
                {"working_set", r.working_set},
                {"active", r.active},
                {"converged", r.converged}};
}

Json to_json(const VerifyReport& r) {
    return Json{{"min_margin", r.min_margin},
                {"violations", r.violations},
                {"kappa_eff", r.kappa_eff},
                {"violation_norm", r.violation_norm},
                {"norm_ratio", r.norm_ratio}};
}

Json to_json(const SminResult& r) {
    return Json{{"smin2", r.smin2},         {"smax2", r.smax2},           {"predicted", r.predicted},
                {"near_edge", r.near_edge}, {"transposed", r.transposed}, {"steps", r.steps}};
}

Container trace_container(const AmpTrace& tr, std::uint64_t params_hash) {
    Container c;
    c.params_hash = params_hash;
    c.kind = "amp-trace";
    c.meta = Json{{"n", tr.n}, {"m", tr.m}, {"ell_under", tr.ell_under}, {"first", tr.first},
                  {"stored", tr.u_hist.size()}, {"eps0", tr.eps0}}
                 .dump();
    c.add("u_final", tr.u_final());
    c.add("au", tr.au);
    c.add("norm2", tr.norm2);
    c.add("target", tr.target);
    for (std::size_t p = 0; p < tr.onsager.size(); ++p) c.add("onsager_" + std::to_string(p), tr.onsager[p]);
    return c;
}

std::vector<double> load_vector(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path);
    char head[8] = {};
    in.read(head, 8);
    const bool binary = in.gcount() == 8 && std::equal(head, head + 8, container_magic);
    in.close();
    if (binary) {
        const Container c = read_container(path);
        for (const char* name : {"u_final", "sigma_hat", "u"})
            if (c.has(name)) return c.array(name);
        throw ValidationError(path + ": no vector array (u_final, sigma_hat or u)");
    }
    const Json j = read_json(path);
    reject_unknown(j, {"u"}, path);
    if (!j.contains("u")) throw ValidationError(path + ": missing field 'u'");
    return j.at("u").get<std::vector<double>>();
}

}  // namespace percamp
