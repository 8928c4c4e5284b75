#ifndef ADFA_SERIALIZE_HPP_
#define ADFA_SERIALIZE_HPP_

#include <string>

#include <json.hpp>

#include "adfa/model.hpp"
#include "adfa/moment.hpp"
#include "adfa/structure.hpp"

namespace adfa {

using Json = nlohmann::json;

// Doubles are written in shortest round-trip form, so reading a document back
// reproduces every probability bit for bit.
Json model_to_json(const AdfaModel& model);
AdfaModel model_from_json(const Json& doc);

Json latent_to_json(const LatentNetwork& latent);
LatentNetwork latent_from_json(const Json& doc);

Json moments_to_json(const MomentSet& moments);
MomentSet moments_from_json(const Json& doc);

// Structure plus optional fitted CPTs and variable names.
Json structure_to_json(const ScoredStructure& structure, const std::vector<std::string>& names,
                       const LatentNetwork* fitted = nullptr);
ScoredStructure structure_from_json(const Json& doc);

Json read_json_file(const std::string& path);
// Pretty-printed with a trailing newline; identical input gives identical bytes.
void write_json_file(const std::string& path, const Json& doc);
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

// FNV-1a over the compact dump, as 16 hex digits.
std::string fingerprint(const Json& doc);

}  // namespace adfa

#endif  // ADFA_SERIALIZE_HPP_
