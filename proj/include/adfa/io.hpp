#ifndef ADFA_IO_HPP_
#define ADFA_IO_HPP_

#include <optional>
#include <string>
#include <vector>

#include "adfa/model.hpp"

namespace adfa {

// Sparse row format: one row per line, whitespace-separated indices of the
// positive variables; an empty line is an all-zero row.
//
// Label files use the same format.  A line may instead list `index:value`
// tokens (value 0 or 1); the latents it does not mention are then unlabeled.
// A line holding only `?` is entirely unlabeled.
struct SparseRows {
  std::size_t width = 0;  // 1 + largest index seen (0 when empty)
  std::vector<std::vector<std::int8_t>> rows;
};

SparseRows parse_sparse_rows(const std::string& text, bool allow_partial);

// n_observed = 0 infers the width from the largest index.
BinaryDataset parse_dataset(const std::string& path, std::size_t n_observed = 0);
BinaryDataset parse_dataset_with_labels(const std::string& data_path, const std::string& labels_path,
                                        std::size_t n_observed, std::size_t m_latent);

std::string format_observed_rows(const BinaryDataset& data);
std::string format_latent_rows(const BinaryDataset& data);
void write_dataset(const std::string& path, const BinaryDataset& data);
void write_labels(const std::string& path, const BinaryDataset& data);

// One anchor line: `latent_name observed_index [p_a1_given_y1 p_a1_given_y0]`.
// Blank lines and lines starting with '#' are skipped.  Further lines for an
// already named latent declare secondary anchors (used only to estimate the
// primary anchor's conditional).
struct AnchorLine {
  std::string latent;
  std::size_t observed = 0;
  std::optional<AnchorConditional> conditional;
  std::size_t line = 0;
};

struct AnchorSpec {
  std::vector<std::string> latents;               // order of first appearance
  std::vector<AnchorLine> primary;                // one per latent, same order
  std::vector<std::vector<std::size_t>> secondary;  // per latent

  bool complete() const;  // every primary anchor has a conditional
};

// n_observed = 0 skips the range check.
AnchorSpec parse_anchor_text(const std::string& text, std::size_t n_observed = 0);
AnchorSpec parse_anchors(const std::string& path, std::size_t n_observed = 0);

// Reorders the anchor spec to `latent_names`; a declared latent without an anchor
// line is a validation error naming it.
AnchorSpec align_anchors(const AnchorSpec& spec, const std::vector<std::string>& latent_names);

// Requires conditionals on every primary line.
AnchorMap anchor_map(const AnchorSpec& spec);

std::string format_anchors(const AnchorMap& anchors, const std::vector<std::string>& latent_names);

}  // namespace adfa

#endif  // ADFA_IO_HPP_
