#ifndef QMDPNET_POMDP_FILE_HPP
#define QMDPNET_POMDP_FILE_HPP

#include <string>

#include "qmdpnet/pomdp.hpp"

namespace qmdpnet {

// Reader/writer for the classic discrete .pomdp text format:
// discount/values/states/actions/observations headers, start distribution,
// T:/O:/R: entries with '*' wildcards and the uniform/identity keywords.
// Unspecified T rows default to identity, Z rows to uniform, rewards to 0.
// `values: cost` inputs are negated into rewards. States absorbing under
// every action are marked terminal. Syntax errors carry the 1-based line
// number; any probability row off by more than 1e-6 is rejected, rows
// within tolerance are renormalized exactly.
TabularPomdp parse_pomdp_text(const std::string& text);
TabularPomdp parse_pomdp_file(const std::string& path);

std::string write_pomdp_text(const TabularPomdp& model);
void write_pomdp_file(const TabularPomdp& model, const std::string& path);

}  // namespace qmdpnet

#endif
