#include "adfa/io.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <sstream>

#include "adfa/error.hpp"
#include "adfa/serialize.hpp"

namespace adfa {

namespace {

std::vector<std::string> tokens_of(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  std::string t;
  while (ss >> t) out.push_back(t);
  return out;
}

std::size_t parse_index(const std::string& s, std::size_t line) {
  std::size_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ParseError("'" + s + "' is not a nonnegative index", line);
  if (v > (std::size_t{1} << 31)) throw ParseError("index " + s + " is too large", line);
  return v;
}

double parse_probability(const std::string& s, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ParseError("'" + s + "' is not a number", line);
  }
  if (used != s.size() || !(v >= 0.0 && v <= 1.0)) throw ParseError("'" + s + "' is not a probability", line);
  return v;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string cur;
  for (char c : text) {
    if (c == '\n') {
      if (!cur.empty() && cur.back() == '\r') cur.pop_back();
      lines.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) lines.push_back(std::move(cur));
  return lines;
}

}  // namespace

SparseRows parse_sparse_rows(const std::string& text, bool allow_partial) {
  SparseRows out;
  const auto lines = split_lines(text);
  std::vector<std::vector<std::pair<std::size_t, std::int8_t>>> entries;
  std::vector<bool> partial;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const std::size_t line_no = ln + 1;
    const auto toks = tokens_of(lines[ln]);
    std::vector<std::pair<std::size_t, std::int8_t>> row;
    bool any_pair = false, any_plain = false, unknown = false;
    for (const auto& t : toks) {
      if (t == "?") {
        unknown = true;
        continue;
      }
      const auto colon = t.find(':');
      if (colon == std::string::npos) {
        any_plain = true;
        row.emplace_back(parse_index(t, line_no), 1);
        continue;
      }
      if (!allow_partial) throw ParseError("'index:value' tokens are only allowed in label files", line_no);
      any_pair = true;
      const std::string val = t.substr(colon + 1);
      if (val != "0" && val != "1") throw ParseError("label value must be 0 or 1 in '" + t + "'", line_no);
      row.emplace_back(parse_index(t.substr(0, colon), line_no), static_cast<std::int8_t>(val == "1"));
    }
    if (unknown && (!allow_partial || toks.size() != 1)) throw ParseError("'?' must stand alone on a label line", line_no);
    if (any_pair && any_plain) throw ParseError("cannot mix plain indices and 'index:value' tokens", line_no);
    std::set<std::size_t> seen;
    for (const auto& [idx, v] : row) {
      if (!seen.insert(idx).second) throw ParseError("index " + std::to_string(idx) + " repeated", line_no);
      out.width = std::max(out.width, idx + 1);
    }
    entries.push_back(std::move(row));
    partial.push_back(any_pair || unknown);
  }
  for (std::size_t r = 0; r < entries.size(); ++r) {
    std::vector<std::int8_t> row(out.width, partial[r] ? BinaryDataset::kUnlabeled : 0);
    for (const auto& [idx, v] : entries[r]) row[idx] = v;
    out.rows.push_back(std::move(row));
  }
  return out;
}

namespace {

std::vector<std::uint8_t> flatten_observed(const SparseRows& rows, std::size_t width) {
  std::vector<std::uint8_t> flat(rows.rows.size() * width, 0);
  for (std::size_t r = 0; r < rows.rows.size(); ++r)
    for (std::size_t j = 0; j < rows.rows[r].size(); ++j) flat[r * width + j] = static_cast<std::uint8_t>(rows.rows[r][j]);
  return flat;
}

}  // namespace

BinaryDataset parse_dataset(const std::string& path, std::size_t n_observed) {
  const SparseRows rows = parse_sparse_rows(read_text_file(path), false);
  if (rows.rows.empty()) throw InvalidArgument(path + ": dataset has no rows");
  if (n_observed == 0) n_observed = rows.width;
  if (rows.width > n_observed) {
    // one row per line, so row r sits on line r + 1
    for (std::size_t r = 0; r < rows.rows.size(); ++r)
      for (std::size_t j = n_observed; j < rows.width; ++j)
        if (rows.rows[r][j] == 1) {
          throw ParseError(path + ": observed index " + std::to_string(j) + " out of range for " +
                               std::to_string(n_observed) + " variables",
                           r + 1);
        }
  }
  if (n_observed == 0) throw InvalidArgument(path + ": cannot infer the number of observed variables");
  return BinaryDataset(n_observed, flatten_observed(rows, n_observed));
}

BinaryDataset parse_dataset_with_labels(const std::string& data_path, const std::string& labels_path,
                                        std::size_t n_observed, std::size_t m_latent) {
  const BinaryDataset obs = parse_dataset(data_path, n_observed);
  const SparseRows labels = parse_sparse_rows(read_text_file(labels_path), true);
  if (labels.rows.size() != obs.rows()) {
    throw InvalidArgument(labels_path + ": has " + std::to_string(labels.rows.size()) + " rows, dataset has " +
                          std::to_string(obs.rows()));
  }
  if (labels.width > m_latent) {
    for (std::size_t r = 0; r < labels.rows.size(); ++r) {
      const auto& row = labels.rows[r];
      const bool partial = std::find(row.begin(), row.end(), BinaryDataset::kUnlabeled) != row.end();
      for (std::size_t i = m_latent; i < labels.width; ++i)
        if (row[i] == 1 || (partial && row[i] == 0)) {
          throw ParseError(labels_path + ": latent index " + std::to_string(i) + " out of range", r + 1);
        }
    }
  }
  std::vector<std::int8_t> flat(obs.rows() * m_latent);
  for (std::size_t r = 0; r < labels.rows.size(); ++r) {
    const auto& row = labels.rows[r];
    const bool partial = std::find(row.begin(), row.end(), BinaryDataset::kUnlabeled) != row.end();
    for (std::size_t i = 0; i < m_latent; ++i) {
      flat[r * m_latent + i] = i < row.size() ? row[i] : (partial ? BinaryDataset::kUnlabeled : 0);
    }
  }
  return BinaryDataset(obs.n_observed(), obs.observed_data(), m_latent, std::move(flat));
}

std::string format_observed_rows(const BinaryDataset& data) {
  std::string out;
  for (std::size_t r = 0; r < data.rows(); ++r) {
    const auto x = data.observed(r);
    bool first = true;
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (!x[j]) continue;
      if (!first) out += ' ';
      out += std::to_string(j);
      first = false;
    }
    out += '\n';
  }
  return out;
}

std::string format_latent_rows(const BinaryDataset& data) {
  if (!data.has_latent()) throw InvalidArgument("dataset has no latent rows");
  std::string out;
  for (std::size_t r = 0; r < data.rows(); ++r) {
    const auto y = data.latent(r);
    const bool partial = std::find(y.begin(), y.end(), BinaryDataset::kUnlabeled) != y.end();
    bool first = true;
    bool any = false;
    for (std::size_t i = 0; i < y.size(); ++i) {
      std::string tok;
      if (partial) {
        if (y[i] == BinaryDataset::kUnlabeled) continue;
        tok = std::to_string(i) + ":" + std::to_string(y[i]);
      } else {
        if (!y[i]) continue;
        tok = std::to_string(i);
      }
      if (!first) out += ' ';
      out += tok;
      first = false;
      any = true;
    }
    if (partial && !any) out += '?';
    out += '\n';
  }
  return out;
}

void write_dataset(const std::string& path, const BinaryDataset& data) { write_text_file(path, format_observed_rows(data)); }
void write_labels(const std::string& path, const BinaryDataset& data) { write_text_file(path, format_latent_rows(data)); }

bool AnchorSpec::complete() const {
  return std::all_of(primary.begin(), primary.end(), [](const AnchorLine& a) { return a.conditional.has_value(); });
}

AnchorSpec parse_anchor_text(const std::string& text, std::size_t n_observed) {
  AnchorSpec spec;
  std::set<std::size_t> used;
  const auto lines = split_lines(text);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const std::size_t line_no = ln + 1;
    const auto toks = tokens_of(lines[ln]);
    if (toks.empty() || toks[0][0] == '#') continue;
    if (toks.size() != 2 && toks.size() != 4) {
      throw ParseError("expected 'latent_name observed_index [p_a1_given_y1 p_a1_given_y0]'", line_no);
    }
    AnchorLine a;
    a.latent = toks[0];
    a.observed = parse_index(toks[1], line_no);
    a.line = line_no;
    if (n_observed && a.observed >= n_observed) {
      throw ParseError("observed index " + toks[1] + " out of range for " + std::to_string(n_observed) + " variables",
                       line_no);
    }
    if (!used.insert(a.observed).second) throw ParseError("observed index " + toks[1] + " anchors twice", line_no);
    if (toks.size() == 4) {
      a.conditional = AnchorConditional{parse_probability(toks[2], line_no), parse_probability(toks[3], line_no)};
      if (a.conditional->p1_given_1 == a.conditional->p1_given_0) {
        throw ParseError("anchor conditional is degenerate (equal columns)", line_no);
      }
    }
    const auto it = std::find(spec.latents.begin(), spec.latents.end(), a.latent);
    if (it == spec.latents.end()) {
      spec.latents.push_back(a.latent);
      spec.primary.push_back(std::move(a));
      spec.secondary.emplace_back();
    } else {
      spec.secondary[static_cast<std::size_t>(it - spec.latents.begin())].push_back(a.observed);
    }
  }
  if (spec.latents.empty()) throw InvalidArgument("anchor file declares no latents");
  return spec;
}

AnchorSpec parse_anchors(const std::string& path, std::size_t n_observed) {
  try {
    return parse_anchor_text(read_text_file(path), n_observed);
  } catch (const Error&) {
    rethrow_with_context(path);
  }
}

AnchorSpec align_anchors(const AnchorSpec& spec, const std::vector<std::string>& latent_names) {
  AnchorSpec out;
  for (const auto& name : latent_names) {
    const auto it = std::find(spec.latents.begin(), spec.latents.end(), name);
    if (it == spec.latents.end()) throw InvalidArgument("latent '" + name + "' has no anchor");
    const auto k = static_cast<std::size_t>(it - spec.latents.begin());
    out.latents.push_back(name);
    out.primary.push_back(spec.primary[k]);
    out.secondary.push_back(spec.secondary[k]);
  }
  for (const auto& name : spec.latents)
    if (std::find(latent_names.begin(), latent_names.end(), name) == latent_names.end()) {
      throw InvalidArgument("anchor file names undeclared latent '" + name + "'");
    }
  return out;
}

AnchorMap anchor_map(const AnchorSpec& spec) {
  std::vector<std::size_t> anchor_of;
  std::vector<AnchorConditional> conds;
  for (const auto& a : spec.primary) {
    if (!a.conditional) throw InvalidArgument("anchor for latent '" + a.latent + "' has no conditional");
    anchor_of.push_back(a.observed);
    conds.push_back(*a.conditional);
  }
  return AnchorMap(std::move(anchor_of), std::move(conds));
}

std::string format_anchors(const AnchorMap& anchors, const std::vector<std::string>& latent_names) {
  if (latent_names.size() != anchors.size()) throw InvalidArgument("one latent name per anchor required");
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const auto& c = anchors.conditional(i);
    os << latent_names[i] << ' ' << anchors.anchor_of(i) << ' ' << c.p1_given_1 << ' ' << c.p1_given_0 << '\n';
  }
  return os.str();
}

}  // namespace adfa
