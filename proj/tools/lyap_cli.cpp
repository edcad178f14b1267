#include <CLI11.hpp>

#include "lyap/bounds.hpp"
#include "lyap/corpus.hpp"
#include "lyap/io.hpp"
#include "lyap/lifting.hpp"
#include "lyap/monte_carlo.hpp"
#include "lyap/structure.hpp"

#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalidInput = 2;
constexpr int kExitBoundUndefined = 3;

struct LowerBoundUndefined : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<int> parse_k_list(const std::string& text) {
  std::vector<int> ks;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const int k = std::stoi(item);
    if (k < 1) throw std::invalid_argument("every k must be >= 1");
    ks.push_back(k);
  }
  if (ks.empty()) throw std::invalid_argument("--k list is empty");
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  return ks;
}

Eigen::VectorXd parse_vector(const std::string& text) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    vals.push_back(std::stod(item));
  }
  Eigen::VectorXd v(vals.size());
  for (std::size_t i = 0; i < vals.size(); ++i) v(i) = vals[i];
  return v;
}

// default beta-tilde support: coordinates whose column is nonzero in every member
Eigen::VectorXd structural_support(const lyap::MatrixFamily& fam) {
  Eigen::VectorXd v = Eigen::VectorXd::Ones(fam.dim);
  for (const auto& a : fam.matrices)
    for (Eigen::Index j = 0; j < fam.dim; ++j)
      if ((a.col(j).array() == 0.0).all()) v(j) = 0.0;
  if (!(v.array() > 0.0).any())
    throw LowerBoundUndefined(
        "every coordinate meets a zero column; beta-tilde has no usable support "
        "(consider the transposed family)");
  return v;
}

int run_classify(const std::string& path, std::uint64_t budget) {
  const lyap::MatrixFamily fam = lyap::io::load_family(path);
  if (!fam.is_nonnegative()) {
    std::cout << lyap::io::classify_json(nullptr, false, lyap::io::recommend(fam, nullptr));
    return kExitOk;
  }
  const lyap::StructureReport rep = lyap::classify(fam, budget);
  std::cout << lyap::io::classify_json(&rep, true, lyap::io::recommend(fam, &rep));
  return kExitOk;
}

struct BoundsArgs {
  std::string path;
  std::string k_list = "1,2,4,8";
  std::string lower = "beta";
  std::string upper = "alpha";
  bool optimize = false;
  std::uint64_t seed = 0;
  int mc_length = 5000;
  int mc_trajectories = 50;
  std::string out;
  std::string support;  // beta-tilde support vector, comma separated
  std::uint64_t budget = 200000;
  double fw_tol = 1e-7;
};

int run_bounds(const BoundsArgs& args) {
  const lyap::MatrixFamily fam = lyap::io::load_family(args.path);
  const std::vector<int> ks = parse_k_list(args.k_list);
  const bool nonneg = fam.is_nonnegative();

  if (!nonneg && args.lower != "none")
    throw std::invalid_argument(
        "signed family: no convergent lower bound exists; rerun with --lower none");
  if (!nonneg && (args.upper == "alpha" || args.upper == "alpha-tilde"))
    throw std::invalid_argument(
        "signed family: use --upper gamma-sdp or --upper euclid");

  std::optional<lyap::PartitionStructure> partition;
  if (args.upper == "alpha-tilde") {
    const lyap::StructureReport rep = lyap::classify(fam, args.budget);
    if (rep.positivity &&
        std::holds_alternative<lyap::PartitionStructure>(*rep.positivity))
      partition = std::get<lyap::PartitionStructure>(*rep.positivity);
    else
      throw std::invalid_argument(
          "alpha-tilde needs the partition case; this family has none (" +
          lyap::io::recommend(fam, &rep) + ")");
  }

  const lyap::McEstimate mc =
      lyap::monte_carlo_lambda(fam, args.mc_length, args.mc_trajectories, args.seed);

  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(fam.dim);
  Eigen::VectorXd support;
  if (args.lower == "beta-tilde")
    support = args.support.empty() ? structural_support(fam) : parse_vector(args.support);

  std::vector<lyap::io::ConvergenceRow> rows;
  std::vector<lyap::io::ParamRow> params;
  for (const int k : ks) {
    lyap::detail::WallTimer timer;
    lyap::io::ConvergenceRow row;
    lyap::io::ParamRow param;
    row.k = k;
    param.k = k;
    row.mc_mean = mc.mean;
    row.mc_stderr = mc.stderr_value;

    if (args.lower != "none") {
      lyap::BoundReport lo;
      if (args.lower == "beta")
        lo = args.optimize ? lyap::beta_optimize(fam, k) : lyap::beta_eval(fam, k, ones);
      else
        lo = lyap::beta_tilde_eval(fam, k, support);
      if (lo.minus_infinity)
        throw LowerBoundUndefined("lower bound is -inf at k=" + std::to_string(k) +
                                  ": " + lo.hint);
      row.lower_kind = to_string(lo.kind);
      row.lower = lo.value;
      param.lower_param = lo.parameter;
    }

    lyap::BoundReport up;
    if (args.upper == "alpha")
      up = args.optimize ? lyap::alpha_optimize(fam, k) : lyap::alpha_eval(fam, k, ones);
    else if (args.upper == "alpha-tilde")
      up = args.optimize ? lyap::alpha_tilde_optimize(fam, *partition, k)
                         : lyap::alpha_tilde_eval(fam, *partition, k, ones);
    else if (args.upper == "euclid")
      up = lyap::euclidean_upper(fam, k);
    else if (args.upper == "gamma-sdp")
      up = lyap::gamma_sdp_upper(fam, k, nullptr, args.fw_tol);
    else
      throw std::invalid_argument("unknown upper bound: " + args.upper);
    row.upper_kind = to_string(up.kind);
    row.upper = up.value;
    param.upper_param = up.parameter;

    row.wall_ms = timer.elapsed_ms();
    rows.push_back(std::move(row));
    params.push_back(std::move(param));
  }

  lyap::io::write_text_file(args.out, lyap::io::convergence_csv(rows));
  lyap::io::write_text_file(args.out + ".params.json",
                            lyap::io::params_sidecar_json(args.path, args.seed, params));
  return kExitOk;
}

int run_mc(const std::string& path, int length, int trajectories, std::uint64_t seed,
           const std::string& x0_text) {
  const lyap::MatrixFamily fam = lyap::io::load_family(path);
  std::optional<Eigen::VectorXd> x0;
  if (!x0_text.empty()) x0 = parse_vector(x0_text);
  const lyap::McEstimate est = lyap::monte_carlo_lambda(
      fam, length, trajectories, seed, x0 ? &*x0 : nullptr);
  std::cout << lyap::io::mc_json(est);
  return kExitOk;
}

struct CorpusArgs {
  std::string name;
  std::string out;
  double omega = 1.0 / 3.0;
  int dim = 5;
  double density = 1.0;
  bool signed_entries = false;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

int run_corpus(const CorpusArgs& args) {
  lyap::MatrixFamily fam;
  if (args.name == "sigma6") {
    fam = lyap::make_sigma6();
  } else if (args.name == "derham") {
    fam = lyap::make_derham(args.omega);
  } else if (args.name == "counterexample") {
    fam = lyap::make_counterexample();
  } else if (args.name == "random") {
    if (!args.seed_given)
      throw std::invalid_argument("--seed is required for the random corpus");
    fam = lyap::make_random(args.dim, args.density, args.signed_entries, args.seed);
  } else {
    throw std::invalid_argument("unknown corpus name: " + args.name);
  }
  lyap::io::save_family(fam, args.out);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"converging certified bounds for the Lyapunov exponent of i.i.d. "
               "random products over a finite matrix family"};
  app.require_subcommand(1);

  std::string classify_path;
  std::uint64_t classify_budget = 200000;
  auto* classify_cmd = app.add_subcommand(
      "classify", "structure report and recommended bound pair for a family file");
  classify_cmd->add_option("family", classify_path, "family JSON file")->required();
  classify_cmd->add_option("--budget", classify_budget, "pattern-state budget");

  BoundsArgs bounds_args;
  auto* bounds_cmd =
      app.add_subcommand("bounds", "lower/upper bound table across product lengths");
  bounds_cmd->add_option("family", bounds_args.path, "family JSON file")->required();
  bounds_cmd->add_option("--k", bounds_args.k_list, "comma-separated product lengths");
  bounds_cmd->add_option("--lower", bounds_args.lower, "beta | beta-tilde | none")
      ->check(CLI::IsMember({"beta", "beta-tilde", "none"}));
  bounds_cmd
      ->add_option("--upper", bounds_args.upper,
                   "alpha | alpha-tilde | euclid | gamma-sdp")
      ->check(CLI::IsMember({"alpha", "alpha-tilde", "euclid", "gamma-sdp"}));
  bounds_cmd->add_flag("--optimize", bounds_args.optimize,
                       "optimize the bound parameters per k");
  bounds_cmd->add_option("--seed", bounds_args.seed, "Monte Carlo seed")->required();
  bounds_cmd->add_option("--mc-length", bounds_args.mc_length, "Monte Carlo steps");
  bounds_cmd->add_option("--mc-trajectories", bounds_args.mc_trajectories,
                         "Monte Carlo trajectories");
  bounds_cmd->add_option("--out", bounds_args.out, "output CSV path")->required();
  bounds_cmd->add_option("--v", bounds_args.support,
                         "beta-tilde support vector, comma separated");
  bounds_cmd->add_option("--budget", bounds_args.budget, "pattern-state budget");
  bounds_cmd->add_option("--fw-tol", bounds_args.fw_tol, "frank-wolfe gap tolerance");

  std::string mc_path, mc_x0;
  int mc_length = 5000, mc_trajectories = 50;
  std::uint64_t mc_seed = 0;
  auto* mc_cmd = app.add_subcommand("mc", "Monte Carlo estimate of the exponent");
  mc_cmd->add_option("family", mc_path, "family JSON file")->required();
  mc_cmd->add_option("-T,--length", mc_length, "steps per trajectory");
  mc_cmd->add_option("-N,--trajectories", mc_trajectories, "trajectory count");
  mc_cmd->add_option("--seed", mc_seed, "RNG seed")->required();
  mc_cmd->add_option("--x0", mc_x0, "start vector, comma separated");

  CorpusArgs corpus_args;
  auto* corpus_cmd = app.add_subcommand("corpus", "write a built-in family file");
  corpus_cmd
      ->add_option("--name", corpus_args.name,
                   "sigma6 | derham | counterexample | random")
      ->required();
  corpus_cmd->add_option("--out", corpus_args.out, "output JSON path")->required();
  corpus_cmd->add_option("--omega", corpus_args.omega, "derham parameter in (0, 1/2)");
  corpus_cmd->add_option("--dim", corpus_args.dim, "random: dimension");
  corpus_cmd->add_option("--density", corpus_args.density,
                         "random: keep probability per entry");
  corpus_cmd->add_flag("--signed", corpus_args.signed_entries,
                       "random: entries uniform on [-0.5, 0.5]");
  corpus_cmd
      ->add_option("--seed", corpus_args.seed, "random: RNG seed")
      ->each([&](const std::string&) { corpus_args.seed_given = true; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalidInput;
  }

  try {
    if (classify_cmd->parsed()) return run_classify(classify_path, classify_budget);
    if (bounds_cmd->parsed()) return run_bounds(bounds_args);
    if (mc_cmd->parsed())
      return run_mc(mc_path, mc_length, mc_trajectories, mc_seed, mc_x0);
    if (corpus_cmd->parsed()) return run_corpus(corpus_args);
  } catch (const LowerBoundUndefined& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBoundUndefined;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalidInput;
  }
  return kExitInvalidInput;
}
