#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "dynbif/torus.hpp"

namespace dynbif {

using json = nlohmann::json;

inline constexpr const char* kTaylorSchema = "dynbif.taylor_model/1";
inline constexpr const char* kPolarSchema = "dynbif.polar_model/1";
inline constexpr const char* kTorusSchema = "dynbif.torus/1";
inline constexpr const char* kScenarioSchema = "dynbif.scenario/1";

json poly_to_json(const ScalarPoly& p);
ScalarPoly poly_from_json(const json& j, const PolyShape& shape);

json taylor_to_json(const TaylorModel& tm);
TaylorModel taylor_from_json(const json& j);

// a normal-form remainder is stored through its Taylor model and rebuilt on load
json polar_to_json(const PolarModel& pm, double nu = 0.05);
PolarModel polar_from_json(const json& j);
bool polar_equal(const PolarModel& a, const PolarModel& b);

json torus_to_json(const TorusGrid& tg);
TorusGrid torus_from_json(const json& j);

json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

struct ScenarioConfig {
  std::string model = "demo";  // "demo" or a Taylor / polar model file
  std::vector<double> eps{0.02, 0.01, 0.005};
  double eps_ref = 0.01;       // single-eps properties
  double k = 1;
  int N = 5, s = 3;
  double nu = 0.05;
  int grid_res = 32;
  double sim_horizon = 20;     // in units of 1/eps
  double census_horizon = 40;  // in units of 1/eps
  double rtol = 1e-9, atol = 1e-11;
  std::uint64_t seed = 0;
  std::string out = "out";
  int jobs = 1;
  int ensemble = 50;
  int probes = 32;
  int census_samples = 1000;
  long measure_samples = 1000000;
  long inclusion_samples = 100000;
  std::vector<double> measure_eps{1e-2, 1e-3, 1e-4};
  double measure_rho = 3;

  // 0 < k < N - 2, eps strictly inside (0, eps0), sizes positive
  void validate(double eps0) const;
};

ScenarioConfig scenario_from_json(const json& j);
json scenario_to_json(const ScenarioConfig& c);

struct LoadedModel {
  std::shared_ptr<const TaylorModel> taylor;    // null for polar model files
  std::shared_ptr<const NormalFormResult> nf;   // null unless taylor is set
  PolarModel polar;
};
// "demo" selects the bundled demo; Taylor files run the normal-form pipeline
LoadedModel load_model(const std::string& source, double nu = 0.05);

}  // namespace dynbif
