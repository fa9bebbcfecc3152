#include "tutoreval/metrics/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "tutoreval/common/errors.hpp"
#include "tutoreval/common/util.hpp"

namespace tutoreval::metrics {

using dialogue::Action;
using dialogue::Agent;
using dialogue::TraceEntry;
using dialogue::Verdict;

std::vector<std::string> tokenize(std::string_view text) {
    std::istringstream in(to_lower(text));
    std::vector<std::string> tokens;
    for (std::string token; in >> token;) tokens.push_back(std::move(token));
    return tokens;
}

std::size_t levenshtein(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t substitution = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, substitution});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double norm_edit_distance(std::string_view a, std::string_view b) {
    const auto ta = tokenize(a);
    const auto tb = tokenize(b);
    const std::size_t longest = std::max(ta.size(), tb.size());
    if (longest == 0) return 0.0;
    return static_cast<double>(levenshtein(ta, tb)) / static_cast<double>(longest);
}

double jaccard_words(std::string_view a, std::string_view b) {
    const auto ta = tokenize(a);
    const auto tb = tokenize(b);
    const std::set<std::string> sa(ta.begin(), ta.end());
    const std::set<std::string> sb(tb.begin(), tb.end());
    if (sa.empty() && sb.empty()) return 1.0;
    std::size_t shared = 0;
    for (const auto& token : sa) shared += sb.count(token);
    return static_cast<double>(shared) / static_cast<double>(sa.size() + sb.size() - shared);
}

std::optional<double> rev_delta(const std::vector<TraceEntry>& trace, int turn) {
    const TraceEntry* generated = nullptr;
    const TraceEntry* finalized = nullptr;
    bool rejected = false;
    for (const auto& e : trace) {
        if (e.turn != turn) continue;
        if (e.agent == Agent::ego && e.action == Action::generate && generated == nullptr) generated = &e;
        if (e.agent == Agent::ego && e.action == Action::finalize) finalized = &e;
        if (e.agent == Agent::superego && e.action == Action::review && e.verdict &&
            e.verdict->verdict == Verdict::rejected) {
            rejected = true;
        }
    }
    if (!rejected || generated == nullptr || finalized == nullptr) return std::nullopt;
    return norm_edit_distance(generated->suggestions, finalized->suggestions);
}

std::vector<std::optional<double>> rev_deltas(const dialogue::DialogueLog& log) {
    std::vector<std::optional<double>> out;
    for (int t = 0; t < static_cast<int>(log.turns.size()); ++t) out.push_back(rev_delta(log.trace, t));
    return out;
}

std::vector<double> adapt_delta(const dialogue::DialogueLog& log) {
    std::vector<double> out;
    for (std::size_t t = 1; t < log.turns.size(); ++t) {
        out.push_back(norm_edit_distance(log.turns[t - 1].tutor_public, log.turns[t].tutor_public));
    }
    return out;
}

int count_questions(std::string_view text) { return static_cast<int>(std::count(text.begin(), text.end(), '?')); }

QuestionRate question_rate(const dialogue::DialogueLog& log) {
    QuestionRate out;
    for (const auto& turn : log.turns) out.per_turn.push_back(count_questions(turn.tutor_public));
    if (!out.per_turn.empty()) {
        double total = 0.0;
        for (int q : out.per_turn) total += q;
        out.mean = total / static_cast<double>(out.per_turn.size());
    }
    return out;
}

KeywordLexicon::KeywordLexicon(std::map<std::string, std::vector<std::string>> keywords) {
    const auto& allowed = keyword_labels();
    for (auto& [label, words] : keywords) {
        if (std::find(allowed.begin(), allowed.end(), label) == allowed.end()) {
            throw ConfigError("lexicon label '" + label + "' is not a keyword taxonomy label");
        }
        for (auto& w : words) w = to_lower(w);
    }
    keywords_ = std::move(keywords);
}

KeywordLexicon KeywordLexicon::defaults() {
    return KeywordLexicon({
        {"RECOGNITION_FAILURE", {"recogni", "dismiss", "their perspective", "learner's view", "own thinking", "autonomy"}},
        {"CONTEXT_AWARENESS", {"context", "earlier", "previous", "already said", "history"}},
        {"ELICITATION", {"question", "ask ", "elicit", "draw out", "invite"}},
        {"VAGUENESS", {"vague", "generic", "unclear", "too general", "more specific"}},
        {"CONTENT_ACCURACY", {"incorrect", "inaccura", "factual", "wrong", "mistake"}},
        {"STRUGGLE_PRESERVATION", {"struggle", "give away", "gives away", "too much help", "premature", "hand them"}},
        {"EMOTIONAL_ATTENTION", {"frustrat", "emotion", "anxi", "feeling", "discourag", "overwhelm"}},
    });
}

KeywordLexicon KeywordLexicon::load(const std::filesystem::path& path) {
    const auto node = load_yaml_file(path);
    const auto root = node["categories"] ? node["categories"] : node;
    if (!root.IsMap()) {
        throw ConfigError(path.string() + ": lexicon must be a map of label to keyword list");
    }
    std::map<std::string, std::vector<std::string>> keywords;
    for (const auto& kv : root) {
        auto& words = keywords[kv.first.as<std::string>()];
        for (const auto& w : kv.second) words.push_back(w.as<std::string>());
    }
    return KeywordLexicon(std::move(keywords));
}

std::set<std::string> KeywordLexicon::classify(std::string_view feedback) const {
    std::set<std::string> labels;
    const auto lowered = to_lower(feedback);
    for (const auto& [label, words] : keywords_) {
        for (const auto& w : words) {
            if (!w.empty() && lowered.find(w) != std::string::npos) {
                labels.insert(label);
                break;
            }
        }
    }
    return labels;
}

std::set<std::string> classify_keywords(std::string_view feedback, const KeywordLexicon& lexicon) {
    return lexicon.classify(feedback);
}

nlohmann::json CritiqueRecord::to_json() const {
    nlohmann::json j = {
        {"dialogue_id", dialogue_id},
        {"cell_id", cell_id},
        {"recognition", recognition},
        {"turn", turn},
        {"round", round},
        {"verdict", verdict == Verdict::approved ? "approved" : "rejected"},
        {"confidence", confidence},
        {"feedback", feedback},
        {"intervention", intervention == dialogue::Intervention::none ? "none" : "revise"},
        {"parse_failed", parse_failed},
        {"ego_draft", ego_draft},
        {"ego_revision", ego_revision ? nlohmann::json(*ego_revision) : nlohmann::json(nullptr)},
        {"categories", categories},
    };
    return j;
}

CritiqueRecord CritiqueRecord::from_json(const nlohmann::json& j) {
    try {
        CritiqueRecord r;
        r.dialogue_id = j.at("dialogue_id").get<std::string>();
        r.cell_id = j.value("cell_id", "");
        r.recognition = j.value("recognition", "");
        r.turn = j.at("turn").get<int>();
        r.round = j.at("round").get<int>();
        r.verdict = j.at("verdict").get<std::string>() == "rejected" ? Verdict::rejected : Verdict::approved;
        r.confidence = j.value("confidence", 0.0);
        r.feedback = j.value("feedback", "");
        r.intervention = j.value("intervention", "none") == "revise" ? dialogue::Intervention::revise
                                                                    : dialogue::Intervention::none;
        r.parse_failed = j.value("parse_failed", false);
        r.ego_draft = j.value("ego_draft", "");
        if (j.contains("ego_revision") && j["ego_revision"].is_string()) {
            r.ego_revision = j["ego_revision"].get<std::string>();
        }
        if (j.contains("categories")) r.categories = j["categories"].get<std::set<std::string>>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad critique record: ") + e.what());
    }
}

std::vector<CritiqueRecord> extract_critiques(const dialogue::DialogueLog& log, const KeywordLexicon& lexicon) {
    std::vector<CritiqueRecord> out;
    const auto& trace = log.trace;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const auto& e = trace[i];
        if (e.agent != Agent::superego || e.action != Action::review) continue;
        CritiqueRecord r;
        r.dialogue_id = log.dialogue_id;
        r.cell_id = log.cell_id;
        r.recognition = log.recognition;
        r.turn = e.turn;
        r.round = e.round.value_or(0);
        const auto verdict = e.verdict.value_or(dialogue::parse_superego_verdict(e.suggestions));
        r.verdict = verdict.verdict;
        r.confidence = verdict.confidence;
        r.intervention = verdict.intervention;
        r.parse_failed = verdict.parse_failed;
        r.feedback = verdict.feedback.empty() ? e.suggestions : verdict.feedback;
        for (std::size_t k = i; k-- > 0;) {
            const auto& prior = trace[k];
            if (prior.turn != e.turn) break;
            if (prior.agent == Agent::ego && (prior.action == Action::generate || prior.action == Action::respond)) {
                r.ego_draft = prior.suggestions;
                break;
            }
        }
        if (r.verdict == Verdict::rejected) {
            for (std::size_t k = i + 1; k < trace.size(); ++k) {
                const auto& next = trace[k];
                if (next.turn != e.turn) break;
                if (next.agent == Agent::ego && next.action == Action::respond) {
                    r.ego_revision = next.suggestions;
                    break;
                }
            }
            if (!r.ego_revision) r.ego_revision = r.ego_draft;
            r.categories = lexicon.classify(r.feedback);
        }
        out.push_back(std::move(r));
    }
    return out;
}

namespace {

bool is_content_address(const std::string& stem) {
    return stem.size() == 64 &&
           std::all_of(stem.begin(), stem.end(), [](char c) { return std::isxdigit(static_cast<unsigned char>(c)); });
}

}  // namespace

std::vector<dialogue::DialogueLog> read_logs(const std::filesystem::path& log_dir, const CritiqueFilter& filter) {
    if (!std::filesystem::is_directory(log_dir)) {
        throw ConfigError("log directory " + log_dir.string() + " does not exist");
    }
    std::vector<std::filesystem::path> paths;
    for (const auto& entry : std::filesystem::directory_iterator(log_dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
        const auto stem = entry.path().stem().string();
        if (is_content_address(stem)) continue;
        if (filter.dialogue_prefix && stem.rfind(*filter.dialogue_prefix, 0) != 0) continue;
        paths.push_back(entry.path());
    }
    std::sort(paths.begin(), paths.end());
    std::vector<dialogue::DialogueLog> logs;
    for (const auto& p : paths) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(read_file(p));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(p.string() + ": " + e.what());
        }
        auto log = dialogue::DialogueLog::from_json(j);
        if (!filter.cell_ids.empty() && !filter.cell_ids.count(log.cell_id)) continue;
        logs.push_back(std::move(log));
    }
    return logs;
}

std::vector<CritiqueRecord> extract_critiques(const std::filesystem::path& log_dir, const CritiqueFilter& filter,
                                              const KeywordLexicon& lexicon) {
    std::vector<CritiqueRecord> out;
    for (const auto& log : read_logs(log_dir, filter)) {
        auto records = extract_critiques(log, lexicon);
        out.insert(out.end(), std::make_move_iterator(records.begin()), std::make_move_iterator(records.end()));
    }
    return out;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<CritiqueRecord>& records) {
    std::string body;
    for (const auto& r : records) body += r.to_json().dump() + "\n";
    write_file_atomic(path, body);
}

std::vector<CritiqueRecord> read_jsonl(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    std::vector<CritiqueRecord> out;
    for (std::string line; std::getline(in, line);) {
        if (trim(line).empty()) continue;
        try {
            out.push_back(CritiqueRecord::from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path.string() + ": " + e.what());
        }
    }
    return out;
}

CritiqueSummary summarize_critiques(const std::vector<CritiqueRecord>& records) {
    CritiqueSummary s;
    s.total = records.size();
    std::map<std::pair<std::string, int>, int> rounds;
    for (const auto& r : records) {
        ++rounds[{r.dialogue_id, r.turn}];
        if (r.parse_failed) {
            ++s.parse_failed;
            continue;
        }
        if (r.verdict == Verdict::approved) {
            ++s.approved;
        } else {
            ++s.rejected;
        }
        for (const auto& c : r.categories) ++s.category_counts[c];
    }
    const std::size_t judged = s.approved + s.rejected;
    if (judged > 0) {
        s.approval_rate = static_cast<double>(s.approved) / static_cast<double>(judged);
        s.rejection_rate = static_cast<double>(s.rejected) / static_cast<double>(judged);
    }
    if (!rounds.empty()) {
        double total = 0.0;
        for (const auto& [key, n] : rounds) total += n;
        s.mean_rounds_per_turn = total / static_cast<double>(rounds.size());
    }
    return s;
}

TransitionCounts transition_analysis(const std::vector<CritiqueRecord>& records) {
    std::map<std::pair<std::string, int>, std::map<int, const CritiqueRecord*>> by_turn;
    for (const auto& r : records) by_turn[{r.dialogue_id, r.turn}][r.round] = &r;
    TransitionCounts counts;
    for (const auto& [key, rounds] : by_turn) {
        auto first = rounds.find(0);
        auto second = rounds.find(1);
        if (first == rounds.end() || second == rounds.end()) continue;
        const bool critiqued_first = first->second->verdict == Verdict::rejected;
        const bool critiqued_second = second->second->verdict == Verdict::rejected;
        if (critiqued_first && critiqued_second) ++counts.persist;
        else if (critiqued_first) ++counts.resolve;
        else if (critiqued_second) ++counts.new_critique;
        else ++counts.stay_approved;
    }
    return counts;
}

namespace {

std::string normalize_label(std::string_view text) {
    std::string out;
    for (char c : to_lower(trim(text))) {
        if (c == ' ' || c == '/' || c == '-') {
            if (!out.empty() && out.back() != '_') out += '_';
        } else {
            out += c;
        }
    }
    return out;
}

}  // namespace

LlmLabel parse_classifier_output(std::string_view raw) {
    LlmLabel failed{kParseFailure, 0.0, std::string(raw)};
    const auto open = raw.find('{');
    const auto close = raw.rfind('}');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open) return failed;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(raw.substr(open, close - open + 1));
    } catch (const nlohmann::json::exception&) {
        return failed;
    }
    if (!j.is_object() || !j.contains("label") || !j["label"].is_string()) return failed;
    const auto label = normalize_label(j["label"].get<std::string>());
    const auto& allowed = classifier_labels();
    if (std::find(allowed.begin(), allowed.end(), label) == allowed.end()) return failed;
    LlmLabel out{label, 0.0, std::string(raw)};
    if (j.contains("confidence") && j["confidence"].is_number()) {
        out.confidence = std::clamp(j["confidence"].get<double>(), 0.0, 1.0);
    }
    return out;
}

LlmLabel classify_llm(const CritiqueRecord& critique, const dialogue::BoundProvider& classifier,
                      const std::string& instruction) {
    if (!classifier.provider) {
        throw ConfigError("classifier has no provider bound");
    }
    std::ostringstream prompt;
    prompt << (instruction.empty()
                   ? "Assign this tutoring critique to exactly one category and answer with JSON "
                     "{\"label\": ..., \"confidence\": 0-1}. Categories:"
                   : instruction);
    if (instruction.empty()) {
        for (const auto& l : classifier_labels()) prompt << " " << l;
    }
    prompt << "\n\nCritique:\n" << critique.feedback << "\n\nDraft under review:\n" << critique.ego_draft;

    backend::ChatRequest request;
    request.role = backend::RoleTag::judge;
    request.system_prompt = "You classify supervisor critiques of tutor drafts.";
    request.messages = {{backend::Speaker::user, prompt.str()}};
    request.temperature = classifier.temperature;
    request.model = classifier.model;
    request.turn_index = critique.turn;
    request.round_index = critique.round;
    return parse_classifier_output(backend::complete(request, *classifier.provider).text);
}

}  // namespace tutoreval::metrics
