#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tutoreval/dialogue/dialogue.hpp"
#include "tutoreval/dialogue/trace.hpp"

namespace tutoreval::metrics {

/// Whitespace split after lowercasing; punctuation stays attached.
std::vector<std::string> tokenize(std::string_view text);

std::size_t levenshtein(const std::vector<std::string>& a, const std::vector<std::string>& b);

/// Token Levenshtein distance over the longer token count; 0 when both are empty.
double norm_edit_distance(std::string_view a, std::string_view b);

/// |A n B| / |A u B| over token sets; 1 when both are empty.
double jaccard_words(std::string_view a, std::string_view b);

/// Draft-to-final distance for one turn of a multi-agent trace: first generate
/// versus finalize. Absent when no review in the turn rejected.
std::optional<double> rev_delta(const std::vector<dialogue::TraceEntry>& trace, int turn);
std::vector<std::optional<double>> rev_deltas(const dialogue::DialogueLog& log);

/// Distance between consecutive tutor public turns; empty with fewer than two turns.
std::vector<double> adapt_delta(const dialogue::DialogueLog& log);

struct QuestionRate {
    std::vector<int> per_turn;
    double mean = 0.0;
};

int count_questions(std::string_view text);
QuestionRate question_rate(const dialogue::DialogueLog& log);

inline const std::vector<std::string>& keyword_labels() {
    static const std::vector<std::string> labels = {
        "RECOGNITION_FAILURE", "CONTEXT_AWARENESS",     "ELICITATION",         "VAGUENESS",
        "CONTENT_ACCURACY",    "STRUGGLE_PRESERVATION", "EMOTIONAL_ATTENTION",
    };
    return labels;
}

/// Case-insensitive substring lexicon, one keyword list per taxonomy label.
class KeywordLexicon {
public:
    KeywordLexicon() = default;
    explicit KeywordLexicon(std::map<std::string, std::vector<std::string>> keywords);

    static KeywordLexicon defaults();
    /// YAML map label -> list of keywords. Labels outside the 7-set are ConfigError.
    static KeywordLexicon load(const std::filesystem::path& path);

    std::set<std::string> classify(std::string_view feedback) const;
    const std::map<std::string, std::vector<std::string>>& keywords() const { return keywords_; }

private:
    std::map<std::string, std::vector<std::string>> keywords_;
};

std::set<std::string> classify_keywords(std::string_view feedback, const KeywordLexicon& lexicon);

struct CritiqueRecord {
    std::string dialogue_id;
    std::string cell_id;
    std::string recognition;
    int turn = 0;
    int round = 0;
    dialogue::Verdict verdict = dialogue::Verdict::approved;
    double confidence = 0.0;
    std::string feedback;
    dialogue::Intervention intervention = dialogue::Intervention::none;
    bool parse_failed = false;
    std::string ego_draft;
    std::optional<std::string> ego_revision;  // present iff rejected
    std::set<std::string> categories;

    nlohmann::json to_json() const;
    static CritiqueRecord from_json(const nlohmann::json& j);
};

/// One record per superego review entry. Keyword categories are assigned to
/// rejected reviews only.
std::vector<CritiqueRecord> extract_critiques(const dialogue::DialogueLog& log, const KeywordLexicon& lexicon);

struct CritiqueFilter {
    std::optional<std::string> dialogue_prefix;  // e.g. a run id
    std::set<std::string> cell_ids;              // empty means all
};

/// Reads every id-path dialogue log under `log_dir` (content-addressed copies are skipped).
std::vector<dialogue::DialogueLog> read_logs(const std::filesystem::path& log_dir, const CritiqueFilter& filter);
std::vector<CritiqueRecord> extract_critiques(const std::filesystem::path& log_dir, const CritiqueFilter& filter,
                                              const KeywordLexicon& lexicon);

void write_jsonl(const std::filesystem::path& path, const std::vector<CritiqueRecord>& records);
std::vector<CritiqueRecord> read_jsonl(const std::filesystem::path& path);

struct CritiqueSummary {
    std::size_t total = 0;
    std::size_t approved = 0;
    std::size_t rejected = 0;
    std::size_t parse_failed = 0;
    double approval_rate = 0.0;  // over non-parse-failed reviews
    double rejection_rate = 0.0;
    double mean_rounds_per_turn = 0.0;
    std::map<std::string, std::size_t> category_counts;
};

CritiqueSummary summarize_critiques(const std::vector<CritiqueRecord>& records);

struct TransitionCounts {
    std::size_t persist = 0;
    std::size_t resolve = 0;
    std::size_t new_critique = 0;
    std::size_t stay_approved = 0;
};

/// Classifies each round 0 -> round 1 pair within a (dialogue, turn).
TransitionCounts transition_analysis(const std::vector<CritiqueRecord>& records);

inline constexpr const char* kParseFailure = "PARSE_FAILURE";

inline const std::vector<std::string>& classifier_labels() {
    static const std::vector<std::string> labels = {
        "content_accuracy",      "learner_model_failure", "tone_mismatch",      "structural_scaffolding",
        "premature_resolution",  "sycophancy_detection",  "repetition_stalling", "autonomy_violation",
        "recognition_failure",   "redirection_without_engagement",
    };
    return labels;
}

struct LlmLabel {
    std::string label;  // one of classifier_labels() or kParseFailure
    double confidence = 0.0;
    std::string raw;
};

/// Expects {"label": ..., "confidence": ...}; anything else yields PARSE_FAILURE.
LlmLabel parse_classifier_output(std::string_view raw);
LlmLabel classify_llm(const CritiqueRecord& critique, const dialogue::BoundProvider& classifier,
                      const std::string& instruction = {});

}  // namespace tutoreval::metrics
