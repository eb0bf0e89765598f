// Simulates a small dependent system, selects one joint penalty, fits every
// equation and runs de-biased inference on the first coefficient of each
// equation. With a directory argument it also writes toy.csv there so that
// config.json can be used with the srelasso tool.
#include <filesystem>
#include <iostream>

#include "srelasso/srelasso.hpp"

int main(int argc, char** argv) {
  using namespace srelasso;

  InferenceScenario sc;
  sc.dep.J = 5;
  sc.dep.K = 10;
  sc.dep.n = 120;
  sc.dep.rho = 0.1;
  sc.dep.truncation = 200;
  sc.alpha0_law = Alpha0Law::Uniform5;
  const GeneratedData gd = gen_inference(sc, 7);

  if (argc > 1) {
    const auto path = std::filesystem::path(argv[1]) / "toy.csv";
    save_panel_csv(path.string(), gd.data);
    std::cerr << "wrote " << path << '\n';
  }

  PenaltyOptions po;
  po.block_size = 8;
  po.draws = 1000;
  po.seed = 42;
  const TuneResult tuned = run_pilot_then_tune(gd.data, po);
  std::cout << "joint lambda " << tuned.plan.lambda_joint << " after " << tuned.pilot.refinement_passes
            << " loading passes\n";

  std::vector<EquationDesign> designs;
  for (int j = 0; j < gd.data.num_equations(); ++j) designs.push_back(make_design(gd.data, j));
  const auto fits = fit_equations(designs, tuned.plan, true);
  for (int j = 0; j < gd.data.num_equations(); ++j)
    std::cout << gd.data.response_name(j) << ": " << fits[static_cast<std::size_t>(j)].coef.support().size()
              << " selected, error norm "
              << prediction_norm(CoefVector(j, fits[static_cast<std::size_t>(j)].coef.values() - gd.truth.beta[static_cast<std::size_t>(j)]),
                                 gd.data)
              << '\n';

  const TargetSet targets(gd.truth.targets, gd.data);
  const AlgorithmResult alg = run_algorithm(gd.data, targets, tuned.plan, DebiasOptions{});
  const BootCriticalValues crit = bootstrap_pivots(alg.estimates, tuned.plan.scheme, 1000, 0.05, 42);
  const ConfidenceReport rep = build_report(alg.estimates, crit, 0.05, {}, &gd.data);
  write_report_markdown(std::cout, rep);
  std::cout << "true values:";
  for (double v : gd.truth.target_values) std::cout << ' ' << v;
  std::cout << '\n';
  return 0;
}
