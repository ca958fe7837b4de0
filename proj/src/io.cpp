#include "brd/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace brd::io {

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

// Non-empty lines with trailing CR removed.
std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  for (auto line : split(text, '\n')) {
    line = trim(line);
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

bool looks_numeric(std::string_view field) {
  double v = 0.0;
  field = trim(field);
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  return ec == std::errc() && ptr == field.data() + field.size();
}

template <typename Int>
Int parse_integer(std::string_view text) {
  text = trim(text);
  Int value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw FormatError("not an integer: '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

std::string format_double(double value) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc()) throw FormatError("cannot format number");
  return {buf.data(), ptr};
}

double parse_double(std::string_view text) {
  text = trim(text);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw FormatError("not a number: '" + std::string(text) + "'");
  }
  return value;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw FormatError("cannot write " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw FormatError("cannot write " + path.string());
  }
}

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  std::string hex;
  hex.reserve(2 * len);
  constexpr char kDigits[] = "0123456789abcdef";
  for (unsigned int i = 0; i < len; ++i) {
    hex.push_back(kDigits[digest[i] >> 4]);
    hex.push_back(kDigits[digest[i] & 0xf]);
  }
  return hex;
}

std::string format_utility_csv(const UtilityTable& utility) {
  std::string out;
  for (std::size_t y = 0; y < utility.n_envs(); ++y) {
    if (y > 0) out += ',';
    out += "env_" + std::to_string(y);
  }
  out += '\n';
  for (std::size_t x = 0; x < utility.n_actions(); ++x) {
    for (std::size_t y = 0; y < utility.n_envs(); ++y) {
      if (y > 0) out += ',';
      out += format_double(utility(x, y));
    }
    out += '\n';
  }
  return out;
}

UtilityTable parse_utility_csv(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw FormatError("utility file is empty");
  const auto header = split(lines.front(), ',');
  for (std::size_t y = 0; y < header.size(); ++y) {
    if (trim(header[y]) != "env_" + std::to_string(y)) {
      throw FormatError("utility header must be env_0,...,env_{M-1}");
    }
  }
  if (lines.size() < 2) throw FormatError("utility file has no action rows");
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split(lines[i], ',');
    if (fields.size() != header.size()) {
      throw FormatError("utility row " + std::to_string(i - 1) + " has " +
                        std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(header.size()));
    }
    auto& row = rows.emplace_back();
    for (auto f : fields) row.push_back(parse_double(f));
  }
  try {
    return UtilityTable::from_rows(rows);
  } catch (const InvalidArgument& e) {
    throw FormatError(e.what());
  }
}

std::string format_env_dist_csv(const Distribution& env_dist) {
  std::string out = "probability\n";
  for (double p : env_dist.probs()) out += format_double(p) + '\n';
  return out;
}

Distribution parse_env_dist_csv(std::string_view text) {
  auto lines = lines_of(text);
  if (!lines.empty() && !looks_numeric(lines.front())) lines.erase(lines.begin());
  std::vector<double> probs;
  for (auto line : lines) probs.push_back(parse_double(line));
  try {
    return Distribution(std::move(probs));
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("environment distribution: ") + e.what());
  }
}

std::string format_metrics_csv(const std::vector<adapt::MetricsRow>& rows) {
  std::string out = std::string(kMetricsHeader) + '\n';
  for (const auto& r : rows) {
    out += format_double(r.beta) + ',' + std::to_string(r.seed) + ',' +
           std::to_string(r.iteration) + ',' + format_double(r.kl_to_optimal) + ',' +
           format_double(r.avg_attempts) + ',' + format_double(r.avg_utility) + ',' +
           format_double(r.objective_j) + '\n';
  }
  return out;
}

std::vector<adapt::MetricsRow> parse_metrics_csv(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty() || lines.front() != kMetricsHeader) {
    throw FormatError("metrics header must be " + std::string(kMetricsHeader));
  }
  std::vector<adapt::MetricsRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split(lines[i], ',');
    if (f.size() != 7) throw FormatError("metrics row has wrong number of fields");
    rows.push_back({parse_double(f[0]), parse_integer<std::uint64_t>(f[1]),
                    parse_integer<std::size_t>(f[2]), parse_double(f[3]),
                    parse_double(f[4]), parse_double(f[5]), parse_double(f[6])});
  }
  return rows;
}

std::string format_final_priors_csv(const std::vector<harness::FinalPrior>& priors) {
  std::string out = "beta,seed";
  const std::size_t n = priors.empty() ? 0 : priors.front().probs.size();
  for (std::size_t x = 0; x < n; ++x) out += ",p_" + std::to_string(x);
  out += '\n';
  for (const auto& p : priors) {
    out += format_double(p.beta) + ',' + std::to_string(p.seed);
    for (double v : p.probs) out += ',' + format_double(v);
    out += '\n';
  }
  return out;
}

std::string format_summary_csv(const std::vector<harness::SummaryRow>& rows) {
  std::string out =
      "beta,iteration,n_seeds,kl_to_optimal_mean,kl_to_optimal_se,avg_attempts_mean,"
      "avg_attempts_se,avg_utility_mean,avg_utility_se,objective_j_mean,objective_j_se\n";
  for (const auto& r : rows) {
    out += format_double(r.beta) + ',' + std::to_string(r.iteration) + ',' +
           std::to_string(r.n_seeds);
    for (const auto& s : {r.kl_to_optimal, r.avg_attempts, r.avg_utility, r.objective_j}) {
      out += ',' + format_double(s.mean) + ',' + format_double(s.se);
    }
    out += '\n';
  }
  return out;
}

SolutionFile to_solution_file(const ba::RateDistortionSolution& solution, Beta beta,
                              const Distribution& env_dist, const ba::SolveOptions& options) {
  SolutionFile file;
  file.beta = beta.value();
  file.env_dist.assign(env_dist.probs().begin(), env_dist.probs().end());
  file.tol = options.tol;
  file.max_iter = options.max_iter;
  file.prior.assign(solution.prior.probs().begin(), solution.prior.probs().end());
  for (const auto& c : solution.conditionals) {
    file.conditionals.emplace_back(c.probs().begin(), c.probs().end());
  }
  file.objective = solution.objective;
  file.iterations = solution.iterations;
  file.converged = solution.converged;
  file.residual = solution.residual;
  return file;
}

std::string format_solution_json(const SolutionFile& s) {
  nlohmann::ordered_json j;
  j["beta"] = s.beta;
  j["env_dist"] = s.env_dist;
  j["tol"] = s.tol;
  j["max_iter"] = s.max_iter;
  j["prior"] = s.prior;
  j["conditionals"] = s.conditionals;
  j["objective"] = s.objective;
  j["iterations"] = s.iterations;
  j["converged"] = s.converged;
  j["residual"] = s.residual;
  return j.dump(2) + '\n';
}

SolutionFile parse_solution_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    SolutionFile s;
    j.at("beta").get_to(s.beta);
    j.at("env_dist").get_to(s.env_dist);
    j.at("tol").get_to(s.tol);
    j.at("max_iter").get_to(s.max_iter);
    j.at("prior").get_to(s.prior);
    j.at("conditionals").get_to(s.conditionals);
    j.at("objective").get_to(s.objective);
    j.at("iterations").get_to(s.iterations);
    j.at("converged").get_to(s.converged);
    j.at("residual").get_to(s.residual);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed solution file: ") + e.what());
  }
}

}  // namespace brd::io
