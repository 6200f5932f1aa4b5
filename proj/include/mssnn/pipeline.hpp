#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mssnn/config.hpp"
#include "mssnn/corpus.hpp"

namespace mssnn {

// Word-target persistence: line i belongs to encoded pair i and holds
// space-separated "id:prob" entries (empty line = pair excluded from the
// word-prediction task). Probabilities round-trip exactly.
void save_targets(const std::string& path, const std::vector<WordTargets>& targets);
std::vector<WordTargets> load_targets(const std::string& path);

// The six pipeline commands. Each throws DataError/NumericError/ContractError
// rather than exiting; `out` receives human-readable progress (suppressed by
// quiet) and, for query, the ranked results.
void cmd_prepare(const RunConfig& cfg, bool quiet, std::ostream& out);
void cmd_train(const RunConfig& cfg, bool quiet, std::ostream& out);
void cmd_index(const RunConfig& cfg, bool quiet, std::ostream& out);
void cmd_query(const RunConfig& cfg, const std::string& text, std::size_t k, bool ann,
               std::ostream& out);
void cmd_eval(const RunConfig& cfg, bool quiet, std::ostream& out);
void cmd_bench(const RunConfig& cfg, bool quiet, std::ostream& out);

}  // namespace mssnn
