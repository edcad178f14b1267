#include "lyap/io.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lyap::io {

using nlohmann::json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << text;
}

MatrixFamily read_family_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("family file is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("dim") || !j.contains("matrices"))
    throw std::invalid_argument("family file needs \"dim\" and \"matrices\"");
  const int d = j.at("dim").get<int>();
  if (d < 1) throw std::invalid_argument("dim must be a positive integer");
  const auto& mats = j.at("matrices");
  if (!mats.is_array() || mats.empty())
    throw std::invalid_argument("\"matrices\" must be a nonempty array");
  std::vector<Eigen::MatrixXd> matrices;
  for (std::size_t n = 0; n < mats.size(); ++n) {
    const auto& flat = mats[n];
    if (!flat.is_array() || flat.size() != static_cast<std::size_t>(d) * d)
      throw std::invalid_argument("matrix " + std::to_string(n) + " must hold exactly " +
                                  std::to_string(d * d) + " row-major entries");
    Eigen::MatrixXd a(d, d);
    for (int i = 0; i < d; ++i)
      for (int jj = 0; jj < d; ++jj) a(i, jj) = flat[i * d + jj].get<double>();
    matrices.push_back(std::move(a));
  }
  std::vector<double> probs;
  if (j.contains("probs")) {
    for (const auto& p : j.at("probs")) probs.push_back(p.get<double>());
  }
  return validate_family<double>(std::move(matrices), std::move(probs));
}

MatrixFamily load_family(const std::string& path) {
  return read_family_json(read_text_file(path));
}

std::string family_to_json(const MatrixFamily& fam) {
  json j;
  j["dim"] = static_cast<int>(fam.dim);
  json mats = json::array();
  for (const auto& a : fam.matrices) {
    json flat = json::array();
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      for (Eigen::Index jj = 0; jj < a.cols(); ++jj) flat.push_back(a(i, jj));
    mats.push_back(std::move(flat));
  }
  j["matrices"] = std::move(mats);
  j["probs"] = fam.probs;
  return j.dump(2) + "\n";
}

void save_family(const MatrixFamily& fam, const std::string& path) {
  write_text_file(path, family_to_json(fam));
}

namespace {

json one_based(const std::vector<int>& idx) {
  json out = json::array();
  for (int i : idx) out.push_back(i + 1);
  return out;
}

json one_based(const std::vector<std::vector<int>>& sets) {
  json out = json::array();
  for (const auto& s : sets) out.push_back(one_based(s));
  return out;
}

}  // namespace

std::string classify_json(const StructureReport* rep, bool nonnegative,
                          const std::string& recommendation) {
  json j;
  j["nonnegative"] = nonnegative;
  if (rep) {
    j["has_zero_row"] = rep->has_zero_row;
    j["has_zero_col"] = rep->has_zero_col;
    j["condition_b"] = rep->condition_b;
    j["reducible"] = rep->reducible;
    if (rep->reducible) {
      j["invariant_set"] = one_based(rep->invariant_set);
      j["block_order"] = one_based(rep->block->permutation);
      j["blocks"] = one_based(rep->block->blocks);
    }
    if (rep->positivity) {
      json p;
      if (const auto* pos = std::get_if<PositiveProduct>(&*rep->positivity)) {
        p["type"] = "positive_product";
        p["word"] = one_based(pos->word);
      } else {
        const auto& part = std::get<PartitionStructure>(*rep->positivity);
        p["type"] = "partition";
        p["classes"] = one_based(part.classes);
        p["perms"] = one_based(part.perms);
      }
      j["positivity"] = std::move(p);
    }
    if (rep->positivity_undecided) j["positivity_undecided"] = true;
  }
  j["recommendation"] = recommendation;
  return j.dump(2) + "\n";
}

std::string recommend(const MatrixFamily& fam, const StructureReport* rep) {
  if (!fam.is_nonnegative())
    return "gamma-sdp upper bound only; signed families admit no convergent lower bound";
  if (!rep) return "structure not computed";
  if (rep->reducible)
    return "family is reducible; solve the diagonal blocks independently and take "
           "the largest exponent";
  if (!rep->condition_b) {
    bool zero_col = false;
    for (bool z : rep->has_zero_col) zero_col = zero_col || z;
    if (zero_col)
      return "beta is -inf (zero columns); use beta-tilde with a restricted support "
             "or bound the transposed family";
    return "beta finite; convergence not guaranteed (zero rows present)";
  }
  if (rep->positivity_undecided)
    return "alpha/beta valid; positivity undecided within the pattern budget";
  if (rep->positivity && std::holds_alternative<PartitionStructure>(*rep->positivity))
    return "alpha-tilde/beta bounds converge (classes are permuted by every member)";
  return "alpha/beta bounds converge (a strictly positive product exists)";
}

std::string mc_json(const McEstimate& est) {
  json j;
  j["mean"] = est.mean;
  j["stderr"] = est.stderr_value;
  j["trajectories"] = est.trajectories;
  j["length"] = est.length;
  j["seed"] = est.seed;
  j["degenerate"] = est.degenerate;
  return j.dump() + "\n";
}

std::string bound_report_csv_header() {
  return "kind,k,value,optimized,certificate,wall_time_ms\n";
}

std::string bound_report_csv_row(const BoundReport& rep) {
  std::ostringstream os;
  os << to_string(rep.kind) << ',' << rep.k << ',' << format_double(rep.value) << ','
     << (rep.optimized ? "true" : "false") << ',' << rep.certificate << ','
     << rep.wall_time_ms << '\n';
  return os.str();
}

std::string convergence_csv_header() {
  return "k,lower_kind,lower,upper_kind,upper,gap,rel_gap,mc_mean,mc_stderr,wall_ms\n";
}

std::string convergence_csv(const std::vector<ConvergenceRow>& rows) {
  std::ostringstream os;
  os << convergence_csv_header();
  for (const auto& r : rows) {
    os << r.k << ',' << r.lower_kind << ',';
    if (r.lower) os << format_double(*r.lower);
    os << ',' << r.upper_kind << ',';
    if (r.upper) os << format_double(*r.upper);
    os << ',';
    if (r.lower && r.upper) {
      const double gap = *r.upper - *r.lower;
      os << format_double(gap) << ','
         << format_double(gap / std::max(std::abs(*r.upper), 1e-12));
    } else {
      os << ',';
    }
    os << ',' << format_double(r.mc_mean) << ',' << format_double(r.mc_stderr) << ','
       << r.wall_ms << '\n';
  }
  return os.str();
}

std::string params_sidecar_json(const std::string& family_path, std::uint64_t seed,
                                const std::vector<ParamRow>& rows) {
  json j;
  j["family"] = family_path;
  j["seed"] = seed;
  json arr = json::array();
  for (const auto& r : rows) {
    json e;
    e["k"] = r.k;
    if (r.lower_param) {
      json v = json::array();
      for (Eigen::Index i = 0; i < r.lower_param->size(); ++i)
        v.push_back((*r.lower_param)(i));
      e["lower_param"] = std::move(v);
    }
    if (r.upper_param) {
      json v = json::array();
      for (Eigen::Index i = 0; i < r.upper_param->size(); ++i)
        v.push_back((*r.upper_param)(i));
      e["upper_param"] = std::move(v);
    }
    arr.push_back(std::move(e));
  }
  j["rows"] = std::move(arr);
  return j.dump(2) + "\n";
}

}  // namespace lyap::io
