#include "adfa/serialize.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "adfa/error.hpp"

namespace adfa {

namespace {

template <typename T>
T get(const Json& doc, const char* key) {
  if (!doc.is_object() || !doc.contains(key)) throw InvalidArgument(std::string("JSON document lacks field '") + key + "'");
  try {
    return doc.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("JSON field '") + key + "' has the wrong type: " + e.what());
  }
}

void expect_format(const Json& doc, const char* format) {
  if (get<std::string>(doc, "format") != format) {
    throw InvalidArgument(std::string("expected a document of format '") + format + "'");
  }
}

}  // namespace

Json latent_to_json(const LatentNetwork& latent) {
  Json cpts = Json::array();
  for (const auto& rows : latent.cpts()) {
    Json t = Json::array();
    for (const auto& row : rows) t.push_back({row[0], row[1]});
    cpts.push_back(std::move(t));
  }
  return Json{{"parents", latent.all_parents()}, {"cpts", std::move(cpts)}};
}

LatentNetwork latent_from_json(const Json& doc) {
  auto parents = get<std::vector<std::vector<std::size_t>>>(doc, "parents");
  auto raw = get<std::vector<std::vector<std::vector<double>>>>(doc, "cpts");
  std::vector<std::vector<LatentNetwork::CptRow>> cpts(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i)
    for (const auto& row : raw[i]) {
      if (row.size() != 2) throw InvalidArgument("CPT rows must have two entries");
      cpts[i].push_back({row[0], row[1]});
    }
  return LatentNetwork(std::move(parents), std::move(cpts));
}

Json model_to_json(const AdfaModel& model) {
  const auto& L = model.loadings();
  Json failures = Json::array();
  for (std::size_t i = 0; i < L.m_latent(); ++i) {
    std::vector<double> row(L.failures().begin() + static_cast<std::ptrdiff_t>(i * L.n_observed()),
                            L.failures().begin() + static_cast<std::ptrdiff_t>((i + 1) * L.n_observed()));
    failures.push_back(row);
  }
  Json anchors = Json::array();
  for (std::size_t i = 0; i < model.anchors().size(); ++i) {
    const auto& c = model.anchors().conditional(i);
    anchors.push_back({{"latent", model.space().latent_names()[i]},
                       {"observed", model.anchors().anchor_of(i)},
                       {"p_a1_given_y1", c.p1_given_1},
                       {"p_a1_given_y0", c.p1_given_0}});
  }
  return Json{{"format", "adfa-model"},
              {"version", 1},
              {"observed_names", model.space().observed_names()},
              {"latent_names", model.space().latent_names()},
              {"latent", latent_to_json(model.latent())},
              {"loadings", {{"failures", std::move(failures)}, {"leaks", L.leaks()}}},
              {"anchors", std::move(anchors)}};
}

AdfaModel model_from_json(const Json& doc) {
  expect_format(doc, "adfa-model");
  VariableSpace space(get<std::vector<std::string>>(doc, "observed_names"),
                      get<std::vector<std::string>>(doc, "latent_names"));
  LatentNetwork latent = latent_from_json(get<Json>(doc, "latent"));
  const Json lj = get<Json>(doc, "loadings");
  auto rows = get<std::vector<std::vector<double>>>(lj, "failures");
  std::vector<double> flat;
  for (const auto& r : rows) {
    if (r.size() != space.n_observed()) throw InvalidArgument("failure rows must have one entry per observed variable");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  NoisyOrLoadings loadings(rows.size(), space.n_observed(), std::move(flat), get<std::vector<double>>(lj, "leaks"));
  std::vector<std::size_t> anchor_of;
  std::vector<AnchorConditional> conds;
  for (const auto& a : get<Json>(doc, "anchors")) {
    anchor_of.push_back(get<std::size_t>(a, "observed"));
    conds.push_back({get<double>(a, "p_a1_given_y1"), get<double>(a, "p_a1_given_y0")});
  }
  return AdfaModel(std::move(space), std::move(latent), std::move(loadings),
                   AnchorMap(std::move(anchor_of), std::move(conds)));
}

Json moments_to_json(const MomentSet& moments) {
  Json tables = Json::array();
  for (std::size_t k = 0; k < moments.layout().subset_count(); ++k) {
    const auto t = moments.table(k);
    tables.push_back({{"ids", moments.layout().subset(k)}, {"table", std::vector<double>(t.begin(), t.end())}});
  }
  return Json{{"format", "adfa-moments"},
              {"order", moments.order()},
              {"vars", moments.vars()},
              {"tables", std::move(tables)}};
}

MomentSet moments_from_json(const Json& doc) {
  expect_format(doc, "adfa-moments");
  LayoutPtr layout = make_layout(get<std::vector<VarId>>(doc, "vars"), get<std::size_t>(doc, "order"));
  std::vector<SubsetMoment> tables;
  for (const auto& t : get<Json>(doc, "tables"))
    tables.emplace_back(get<std::vector<VarId>>(t, "ids"), get<std::vector<double>>(t, "table"));
  return MomentSet::from_moments(std::move(layout), tables);
}

Json structure_to_json(const ScoredStructure& s, const std::vector<std::string>& names, const LatentNetwork* fitted) {
  Json doc{{"format", "adfa-structure"},
           {"names", names},
           {"parents", s.parents},
           {"family_scores", s.family_scores},
           {"score", s.score}};
  if (fitted) doc["latent"] = latent_to_json(*fitted);
  return doc;
}

ScoredStructure structure_from_json(const Json& doc) {
  expect_format(doc, "adfa-structure");
  ScoredStructure s;
  s.parents = get<ParentSets>(doc, "parents");
  s.family_scores = get<std::vector<double>>(doc, "family_scores");
  s.score = get<double>(doc, "score");
  if (s.family_scores.size() != s.parents.size()) throw InvalidArgument("one family score per variable required");
  if (!is_acyclic(s.parents)) throw InvalidArgument("structure contains a cycle");
  return s;
}

Json read_json_file(const std::string& path) {
  const std::string text = read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // Report the line of the offending byte.
    std::size_t line = 1;
    for (std::size_t i = 0; i < std::min<std::size_t>(e.byte, text.size()); ++i) line += text[i] == '\n';
    throw ParseError(path + ": " + e.what(), line);
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidArgument("cannot write " + path);
  out << text;
  if (!out) throw InvalidArgument("failed writing " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_json_file(const std::string& path, const Json& doc) { write_text_file(path, doc.dump(2) + "\n"); }

std::string fingerprint(const Json& doc) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : doc.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace adfa
