#pragma once

#include <initializer_list>
#include <string>
#include <vector>

#include <json.hpp>

#include "percamp/amp.hpp"
#include "percamp/container.hpp"
#include "percamp/fop.hpp"
#include "percamp/rounding.hpp"
#include "percamp/state_evolution.hpp"
#include "percamp/variational.hpp"

namespace percamp {

using Json = nlohmann::ordered_json;

inline constexpr const char* code_version = "0.1.0";

// Throws ValidationError naming the first key of j outside allowed.
void reject_unknown(const Json& j, std::initializer_list<const char*> allowed, const std::string& where);

Json fop_to_json(const Fop& g);
Fop fop_from_json(const Json& j);
void save_fop(const Fop& g, const std::string& path);
Fop load_fop(const std::string& path);

Json read_json(const std::string& path);
// Two-space indentation, trailing newline.
void write_json(const Json& j, const std::string& path);

Json to_json(const VariationalResult& r);
Json to_json(const Schedule& s);
Json to_json(const StationarityReport& r);
Json to_json(const OverlapReport& r);
Json to_json(const IncrementReport& r);
Json to_json(const std::vector<SeCheckRow>& rows);
Json to_json(const RoundedSolution& r);  // summary, no vectors
Json to_json(const VerifyReport& r);
Json to_json(const SminResult& r);

// Final iterate, A u, norms and Onsager coefficients of a trace.
Container trace_container(const AmpTrace& tr, std::uint64_t params_hash);
// Reads an N-vector from a container (array "u_final", "sigma_hat" or "u") or
// from a JSON file {"u": [...]}.
std::vector<double> load_vector(const std::string& path);

}  // namespace percamp
