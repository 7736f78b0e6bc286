#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace smile {

using TokenId = int;
using TokenSeq = std::vector<TokenId>;
using FeatureVec = std::vector<std::uint8_t>;

struct SpecialIds {
    TokenId pad = 0;
    TokenId bos = 1;
    TokenId eos = 2;
    TokenId unk = 3;
};

/// Word-level vocabulary. Ids are dense; specials occupy 0..3. Alias tokens are
/// reserved spellings that the generator never emits (used for first-token shifting).
class Vocabulary {
public:
    Vocabulary() = default;
    explicit Vocabulary(std::vector<std::string> tokens, SpecialIds specials = {},
                        std::map<TokenId, TokenId> rare_alias = {});

    std::size_t size() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }
    const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
    TokenId id_of(const std::string& word) const;
    bool contains(const std::string& word) const { return id_of_.count(word) != 0; }

    const SpecialIds& specials() const { return specials_; }
    bool is_special(TokenId id) const;

    const std::map<TokenId, TokenId>& rare_alias() const { return rare_alias_; }
    std::optional<TokenId> alias_of(TokenId id) const;
    /// Maps an alias token back to its source token; identity otherwise.
    TokenId canonical(TokenId id) const;

    nlohmann::json to_json() const;
    static Vocabulary from_json(const nlohmann::json& j);

    bool operator==(const Vocabulary& other) const {
        return tokens_ == other.tokens_ && rare_alias_ == other.rare_alias_ &&
               specials_.pad == other.specials_.pad && specials_.bos == other.specials_.bos &&
               specials_.eos == other.specials_.eos && specials_.unk == other.specials_.unk;
    }

private:
    void validate() const;

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> id_of_;
    SpecialIds specials_;
    std::map<TokenId, TokenId> rare_alias_;
    std::unordered_map<TokenId, TokenId> canonical_;
};

enum class ConceptKind { noun, adjective, verb };

/// Fixed concept inventory: position in this list is the feature bit index.
struct ConceptInventory {
    std::vector<std::string> words;
    std::vector<ConceptKind> kinds;
    std::size_t subject_nouns = 0;     // nouns [0, subject_nouns) act as subjects
    std::size_t object_nouns = 0;      // followed by object nouns
    std::size_t subject_adjectives = 0;
    std::size_t object_adjectives = 0;
    std::size_t verbs = 0;

    std::size_t size() const { return words.size(); }
    std::size_t noun_begin() const { return 0; }
    std::size_t object_noun_begin() const { return subject_nouns; }
    std::size_t adjective_begin() const { return subject_nouns + object_nouns; }
    std::size_t object_adjective_begin() const { return adjective_begin() + subject_adjectives; }
    std::size_t verb_begin() const { return object_adjective_begin() + object_adjectives; }
};

struct ObjectPhrase {
    int noun = -1;               // concept index
    std::vector<int> attributes; // concept indices, ascending
};

struct Entity {
    int noun = -1;
    std::vector<int> attributes;
    std::optional<int> action;
    std::optional<ObjectPhrase> object;
};

struct Scene {
    int scene_id = 0;
    std::vector<Entity> entities;
    FeatureVec features;
};

struct Sample {
    int scene_id = 0;
    FeatureVec features;
    TokenSeq caption;  // BOS ... EOS
    int detail_level = 0;

    bool operator==(const Sample&) const = default;
};

enum class CorpusMode { full, simplest, simpler };

struct ConceptCounts {
    int nouns = 30;
    int adjectives = 20;
    int verbs = 10;
};

struct CorpusConfig {
    std::uint64_t seed = 0;
    int n_scenes = 2000;
    std::array<double, 4> detail_distribution{0.35, 0.45, 0.15, 0.05};
    CorpusMode mode = CorpusMode::full;
    ConceptCounts vocab_concepts;
    int paraphrases = 1;
    int subject_attributes = 2;
    double object_prob = 0.8;
    /// simpler mode: probability of cutting the subject-verb-object constituent
    /// after the subject, after the verb, or keeping it whole.
    std::array<double, 3> simpler_depth{0.5, 0.3, 0.2};

    /// Throws std::invalid_argument on inconsistent settings.
    void validate() const;
};

struct Corpus {
    Vocabulary vocab;
    ConceptInventory concepts;
    std::vector<Sample> samples;
    std::vector<Scene> scenes;
};

/// Builds the vocabulary and concept inventory implied by the concept counts.
std::pair<Vocabulary, ConceptInventory> build_vocabulary(const ConceptCounts& counts);

Corpus generate_corpus(const CorpusConfig& config);

/// Word-level whitespace split with BOS/EOS framing; unknown words map to UNK.
TokenSeq tokenize(const std::string& text, const Vocabulary& vocab);
/// Inverse of tokenize: drops BOS/EOS/PAD, folds aliases to their source word.
std::string detokenize(const TokenSeq& ids, const Vocabulary& vocab);

/// Concept index of a token, if the token names a concept.
std::optional<int> concept_of(TokenId id, const Vocabulary& vocab, const ConceptInventory& concepts);

class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

void write_corpus(const std::filesystem::path& path, const std::vector<Sample>& samples);
/// Throws ParseError naming the first malformed line.
std::vector<Sample> read_corpus(const std::filesystem::path& path);

void write_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab);
Vocabulary read_vocabulary(const std::filesystem::path& path);

nlohmann::json to_json(const CorpusConfig& config);
CorpusConfig corpus_config_from_json(const nlohmann::json& j);
std::string to_string(CorpusMode mode);
CorpusMode parse_corpus_mode(const std::string& s);

/// Validation split rule shared by every tool: scenes with id % 10 == 0 are held out.
bool is_validation_scene(int scene_id);

}  // namespace smile
