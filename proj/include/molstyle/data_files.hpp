#pragma once

#include <string_view>

// Text of the bundled data files under data/, compiled into the library so
// the tools run from any working directory.
namespace molstyle::data {

std::string_view valence_table();
std::string_view logp_table();
std::string_view tpsa_table();
std::string_view alert_set();
std::string_view reference_corpus();

}  // namespace molstyle::data
