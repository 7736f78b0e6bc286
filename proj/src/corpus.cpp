#include "smile/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <sstream>

namespace smile {

namespace {

const std::vector<std::string> kSubjectNouns = {
    "man",   "woman", "boy",    "girl",   "dog",   "cat",     "horse",  "bird",    "cow",    "sheep",
    "child", "player", "chef",  "rider",  "bear",  "goat",    "duck",   "monkey",  "zebra",  "giraffe",
    "baby",  "skier", "surfer", "farmer", "pilot", "student", "doctor", "teacher", "lion",   "tiger"};
const std::vector<std::string> kObjectNouns = {
    "ball", "kite", "frisbee", "bike", "board", "umbrella", "cake", "book", "phone", "bag",
    "box",  "hat",  "pizza",   "cup",  "rope"};
const std::vector<std::string> kSubjectAdjectives = {
    "young", "old",    "tall",  "small", "happy", "brown",  "black",  "white",  "spotted", "furry",
    "little", "big",   "smiling", "sleepy", "dirty", "wet", "hungry", "busy",   "quiet",   "proud"};
const std::vector<std::string> kObjectAdjectives = {
    "red", "blue", "green", "yellow", "wooden", "plastic", "shiny", "striped", "broken"};
const std::vector<std::string> kVerbs = {
    "holds", "throws", "carries", "watches", "rides", "chases", "eats", "kicks",
    "catches", "pushes", "drops", "lifts", "grabs", "drags", "touches"};

const std::vector<std::string> kArticles = {"a", "the"};

std::size_t pick_index(std::mt19937_64& rng, std::span<const double> probs) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u = unit(rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) {
            return i;
        }
    }
    // Rounding slack: fall back to the last index with positive mass.
    for (std::size_t i = probs.size(); i-- > 0;) {
        if (probs[i] > 0.0) {
            return i;
        }
    }
    return 0;
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
    std::uniform_int_distribution<int> dist(lo, hi);
    return dist(rng);
}

std::vector<int> sample_distinct(std::mt19937_64& rng, int begin, int count, int k) {
    std::vector<int> pool(static_cast<std::size_t>(count));
    std::iota(pool.begin(), pool.end(), begin);
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(static_cast<std::size_t>(std::min(k, count)));
    std::sort(pool.begin(), pool.end());
    return pool;
}

std::vector<std::string> split_words(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::string> words;
    std::string w;
    while (in >> w) {
        words.push_back(w);
    }
    return words;
}

Scene make_scene(int scene_id, const ConceptInventory& inv, const CorpusConfig& cfg, std::mt19937_64& rng) {
    Scene scene;
    scene.scene_id = scene_id;
    Entity subject;
    subject.noun = uniform_int(rng, 0, static_cast<int>(inv.subject_nouns) - 1);
    subject.attributes = sample_distinct(rng, static_cast<int>(inv.adjective_begin()),
                                         static_cast<int>(inv.subject_adjectives), cfg.subject_attributes);
    subject.action = static_cast<int>(inv.verb_begin()) + uniform_int(rng, 0, static_cast<int>(inv.verbs) - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (unit(rng) < cfg.object_prob) {
        ObjectPhrase obj;
        obj.noun = static_cast<int>(inv.object_noun_begin()) + uniform_int(rng, 0, static_cast<int>(inv.object_nouns) - 1);
        obj.attributes = {static_cast<int>(inv.object_adjective_begin()) +
                          uniform_int(rng, 0, static_cast<int>(inv.object_adjectives) - 1)};
        subject.object = obj;
    }
    scene.entities.push_back(subject);

    scene.features.assign(inv.size(), 0);
    for (const Entity& e : scene.entities) {
        scene.features[static_cast<std::size_t>(e.noun)] = 1;
        for (int a : e.attributes) {
            scene.features[static_cast<std::size_t>(a)] = 1;
        }
        if (e.action) {
            scene.features[static_cast<std::size_t>(*e.action)] = 1;
        }
        if (e.object) {
            scene.features[static_cast<std::size_t>(e.object->noun)] = 1;
            for (int a : e.object->attributes) {
                scene.features[static_cast<std::size_t>(a)] = 1;
            }
        }
    }
    return scene;
}

// Caption grammar for the main entity:
//   level 0: a N
//   level 1: a N V
//   level 2: a A1 N V
//   level 3: a A1 .. Ak N V [the Ao No]
// simpler mode: the subject-verb-object constituent "a N V [the No]", cut after
// the subject or after the verb according to simpler_depth.
std::vector<std::string> caption_words(const Scene& scene, const ConceptInventory& inv, int level,
                                       int simpler_cut) {
    const Entity& e = scene.entities.front();
    auto w = [&](int c) { return inv.words[static_cast<std::size_t>(c)]; };
    std::vector<std::string> out{"a"};
    if (simpler_cut >= 0) {
        out.push_back(w(e.noun));
        if (simpler_cut >= 1 && e.action) {
            out.push_back(w(*e.action));
            if (simpler_cut >= 2 && e.object) {
                out.push_back("the");
                out.push_back(w(e.object->noun));
            }
        }
        return out;
    }
    if (level >= 2 && !e.attributes.empty()) {
        const std::size_t n_adj = level == 2 ? 1 : e.attributes.size();
        for (std::size_t i = 0; i < n_adj; ++i) {
            out.push_back(w(e.attributes[i]));
        }
    }
    out.push_back(w(e.noun));
    if (level >= 1 && e.action) {
        out.push_back(w(*e.action));
    }
    if (level >= 3 && e.object) {
        out.push_back("the");
        for (int a : e.object->attributes) {
            out.push_back(w(a));
        }
        out.push_back(w(e.object->noun));
    }
    return out;
}

void require(bool ok, const std::string& msg) {
    if (!ok) {
        throw std::invalid_argument(msg);
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary(std::vector<std::string> tokens, SpecialIds specials, std::map<TokenId, TokenId> rare_alias)
    : tokens_(std::move(tokens)), specials_(specials), rare_alias_(std::move(rare_alias)) {
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (!id_of_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
            throw std::invalid_argument("duplicate token '" + tokens_[i] + "'");
        }
    }
    for (const auto& [src, alias] : rare_alias_) {
        canonical_[alias] = src;
    }
    validate();
}

void Vocabulary::validate() const {
    const std::set<TokenId> sp{specials_.pad, specials_.bos, specials_.eos, specials_.unk};
    require(sp.size() == 4, "special token ids must be distinct");
    for (TokenId id : sp) {
        require(id >= 0 && static_cast<std::size_t>(id) < tokens_.size(), "special token id out of range");
    }
    for (const auto& [src, alias] : rare_alias_) {
        require(src >= 0 && static_cast<std::size_t>(src) < tokens_.size(), "alias source out of range");
        require(alias >= 0 && static_cast<std::size_t>(alias) < tokens_.size(), "alias target out of range");
        require(src != alias, "alias must differ from its source");
    }
}

TokenId Vocabulary::id_of(const std::string& word) const {
    auto it = id_of_.find(word);
    return it == id_of_.end() ? specials_.unk : it->second;
}

bool Vocabulary::is_special(TokenId id) const {
    return id == specials_.pad || id == specials_.bos || id == specials_.eos || id == specials_.unk;
}

std::optional<TokenId> Vocabulary::alias_of(TokenId id) const {
    auto it = rare_alias_.find(id);
    if (it == rare_alias_.end()) {
        return std::nullopt;
    }
    return it->second;
}

TokenId Vocabulary::canonical(TokenId id) const {
    auto it = canonical_.find(id);
    return it == canonical_.end() ? id : it->second;
}

nlohmann::json Vocabulary::to_json() const {
    nlohmann::json alias = nlohmann::json::object();
    for (const auto& [src, dst] : rare_alias_) {
        alias[std::to_string(src)] = dst;
    }
    return {{"tokens", tokens_},
            {"specials", {{"pad", specials_.pad}, {"bos", specials_.bos}, {"eos", specials_.eos}, {"unk", specials_.unk}}},
            {"rare_alias", alias}};
}

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
    SpecialIds sp;
    const auto& s = j.at("specials");
    sp.pad = s.at("pad").get<int>();
    sp.bos = s.at("bos").get<int>();
    sp.eos = s.at("eos").get<int>();
    sp.unk = s.at("unk").get<int>();
    std::map<TokenId, TokenId> alias;
    for (const auto& [k, v] : j.at("rare_alias").items()) {
        alias[std::stoi(k)] = v.get<int>();
    }
    return Vocabulary(j.at("tokens").get<std::vector<std::string>>(), sp, std::move(alias));
}

// ---------------------------------------------------------------------------
// Generation

void CorpusConfig::validate() const {
    require(n_scenes > 0, "n_scenes must be positive");
    require(paraphrases > 0, "paraphrases must be positive");
    require(vocab_concepts.nouns >= 2 && vocab_concepts.adjectives >= 2 && vocab_concepts.verbs >= 1,
            "concept counts must be positive (at least 2 nouns and 2 adjectives)");
    require(vocab_concepts.nouns <= static_cast<int>(kSubjectNouns.size() + kObjectNouns.size()) &&
                vocab_concepts.adjectives <= static_cast<int>(kSubjectAdjectives.size() + kObjectAdjectives.size()) &&
                vocab_concepts.verbs <= static_cast<int>(kVerbs.size()),
            "concept counts exceed the built-in word lists");
    double sum = 0.0;
    for (double p : detail_distribution) {
        require(p >= 0.0, "detail_distribution entries must be non-negative");
        sum += p;
    }
    require(std::abs(sum - 1.0) <= 1e-9, "detail_distribution must sum to 1");
    double depth_sum = 0.0;
    for (double p : simpler_depth) {
        require(p >= 0.0, "simpler_depth entries must be non-negative");
        depth_sum += p;
    }
    require(std::abs(depth_sum - 1.0) <= 1e-9, "simpler_depth must sum to 1");
    require(object_prob >= 0.0 && object_prob <= 1.0, "object_prob must lie in [0, 1]");
    require(subject_attributes >= 1, "subject_attributes must be at least 1");
    auto only_level = [&](int level) {
        for (int l = 0; l < 4; ++l) {
            if (l != level && detail_distribution[static_cast<std::size_t>(l)] > 1e-9) {
                return false;
            }
        }
        return true;
    };
    if (mode == CorpusMode::simplest) {
        require(only_level(0), "mode=simplest admits only detail level 0");
    }
    if (mode == CorpusMode::simpler) {
        require(only_level(1), "mode=simpler admits only detail level 1");
    }
}

std::pair<Vocabulary, ConceptInventory> build_vocabulary(const ConceptCounts& counts) {
    ConceptInventory inv;
    const auto n_obj_nouns = static_cast<std::size_t>(std::max(1, counts.nouns / 3));
    const auto n_obj_adj = static_cast<std::size_t>(std::max(1, counts.adjectives * 3 / 10));
    inv.subject_nouns = static_cast<std::size_t>(counts.nouns) - n_obj_nouns;
    inv.object_nouns = n_obj_nouns;
    inv.subject_adjectives = static_cast<std::size_t>(counts.adjectives) - n_obj_adj;
    inv.object_adjectives = n_obj_adj;
    inv.verbs = static_cast<std::size_t>(counts.verbs);
    require(inv.subject_nouns <= kSubjectNouns.size() && inv.object_nouns <= kObjectNouns.size() &&
                inv.subject_adjectives <= kSubjectAdjectives.size() &&
                inv.object_adjectives <= kObjectAdjectives.size() && inv.verbs <= kVerbs.size(),
            "concept counts exceed the built-in word lists");
    auto add = [&](const std::vector<std::string>& src, std::size_t n, ConceptKind kind) {
        for (std::size_t i = 0; i < n; ++i) {
            inv.words.push_back(src[i]);
            inv.kinds.push_back(kind);
        }
    };
    add(kSubjectNouns, inv.subject_nouns, ConceptKind::noun);
    add(kObjectNouns, inv.object_nouns, ConceptKind::noun);
    add(kSubjectAdjectives, inv.subject_adjectives, ConceptKind::adjective);
    add(kObjectAdjectives, inv.object_adjectives, ConceptKind::adjective);
    add(kVerbs, inv.verbs, ConceptKind::verb);

    std::vector<std::string> tokens{"<pad>", "<bos>", "<eos>", "<unk>"};
    tokens.insert(tokens.end(), kArticles.begin(), kArticles.end());
    tokens.insert(tokens.end(), inv.words.begin(), inv.words.end());
    std::map<TokenId, TokenId> alias;
    for (std::size_t i = 0; i < kArticles.size(); ++i) {
        alias[static_cast<TokenId>(4 + i)] = static_cast<TokenId>(tokens.size());
        tokens.push_back("##" + kArticles[i]);
    }
    return {Vocabulary(std::move(tokens), SpecialIds{}, std::move(alias)), std::move(inv)};
}

Corpus generate_corpus(const CorpusConfig& config) {
    config.validate();
    auto [vocab, inv] = build_vocabulary(config.vocab_concepts);
    Corpus corpus{std::move(vocab), std::move(inv), {}, {}};
    std::mt19937_64 rng(config.seed);
    corpus.scenes.reserve(static_cast<std::size_t>(config.n_scenes));
    for (int s = 0; s < config.n_scenes; ++s) {
        Scene scene = make_scene(s, corpus.concepts, config, rng);
        for (int p = 0; p < config.paraphrases; ++p) {
            const int level = static_cast<int>(pick_index(rng, config.detail_distribution));
            int cut = -1;
            if (config.mode == CorpusMode::simpler) {
                cut = static_cast<int>(pick_index(rng, config.simpler_depth));
            }
            const auto words = caption_words(scene, corpus.concepts, level, cut);
            Sample sample;
            sample.scene_id = scene.scene_id;
            sample.features = scene.features;
            sample.detail_level = level;
            sample.caption.push_back(corpus.vocab.specials().bos);
            for (const auto& w : words) {
                sample.caption.push_back(corpus.vocab.id_of(w));
            }
            sample.caption.push_back(corpus.vocab.specials().eos);
            corpus.samples.push_back(std::move(sample));
        }
        corpus.scenes.push_back(std::move(scene));
    }
    return corpus;
}

TokenSeq tokenize(const std::string& text, const Vocabulary& vocab) {
    TokenSeq ids{vocab.specials().bos};
    for (const auto& w : split_words(text)) {
        ids.push_back(vocab.id_of(w));
    }
    ids.push_back(vocab.specials().eos);
    return ids;
}

std::string detokenize(const TokenSeq& ids, const Vocabulary& vocab) {
    const auto& sp = vocab.specials();
    std::string out;
    for (TokenId id : ids) {
        if (id == sp.bos || id == sp.eos || id == sp.pad) {
            continue;
        }
        if (!out.empty()) {
            out += ' ';
        }
        out += vocab.token(vocab.canonical(id));
    }
    return out;
}

std::optional<int> concept_of(TokenId id, const Vocabulary& vocab, const ConceptInventory& concepts) {
    // Concepts sit right after the specials and articles, in inventory order.
    const TokenId first = 4 + static_cast<TokenId>(kArticles.size());
    const TokenId c = vocab.canonical(id) - first;
    if (c < 0 || static_cast<std::size_t>(c) >= concepts.size() ||
        vocab.token(vocab.canonical(id)) != concepts.words[static_cast<std::size_t>(c)]) {
        return std::nullopt;
    }
    return c;
}

// ---------------------------------------------------------------------------
// Persistence

void write_corpus(const std::filesystem::path& path, const std::vector<Sample>& samples) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    for (const auto& s : samples) {
        std::vector<int> bits(s.features.begin(), s.features.end());
        nlohmann::json j{{"scene_id", s.scene_id}, {"features", bits}, {"caption", s.caption}, {"detail_level", s.detail_level}};
        out << j.dump() << '\n';
    }
}

std::vector<Sample> read_corpus(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::vector<Sample> samples;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        try {
            const auto j = nlohmann::json::parse(line);
            Sample s;
            s.scene_id = j.at("scene_id").get<int>();
            for (int b : j.at("features").get<std::vector<int>>()) {
                if (b != 0 && b != 1) {
                    throw std::invalid_argument("feature bits must be 0 or 1");
                }
                s.features.push_back(static_cast<std::uint8_t>(b));
            }
            s.caption = j.at("caption").get<TokenSeq>();
            s.detail_level = j.at("detail_level").get<int>();
            if (s.caption.size() < 3) {
                throw std::invalid_argument("caption shorter than BOS, word, EOS");
            }
            samples.push_back(std::move(s));
        } catch (const std::exception& e) {
            throw ParseError(line_no, e.what());
        }
    }
    return samples;
}

void write_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    out << vocab.to_json().dump(2) << '\n';
}

Vocabulary read_vocabulary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    return Vocabulary::from_json(nlohmann::json::parse(in));
}

std::string to_string(CorpusMode mode) {
    switch (mode) {
        case CorpusMode::full: return "full";
        case CorpusMode::simplest: return "simplest";
        case CorpusMode::simpler: return "simpler";
    }
    return "full";
}

CorpusMode parse_corpus_mode(const std::string& s) {
    if (s == "full") return CorpusMode::full;
    if (s == "simplest") return CorpusMode::simplest;
    if (s == "simpler") return CorpusMode::simpler;
    throw std::invalid_argument("unknown corpus mode '" + s + "'");
}

nlohmann::json to_json(const CorpusConfig& c) {
    return {{"seed", c.seed},
            {"n_scenes", c.n_scenes},
            {"detail_distribution", c.detail_distribution},
            {"mode", to_string(c.mode)},
            {"vocab_concepts", {{"nouns", c.vocab_concepts.nouns}, {"adjectives", c.vocab_concepts.adjectives}, {"verbs", c.vocab_concepts.verbs}}},
            {"paraphrases", c.paraphrases},
            {"subject_attributes", c.subject_attributes},
            {"object_prob", c.object_prob},
            {"simpler_depth", c.simpler_depth}};
}

CorpusConfig corpus_config_from_json(const nlohmann::json& j) {
    CorpusConfig c;
    c.seed = j.value("seed", c.seed);
    c.n_scenes = j.value("n_scenes", c.n_scenes);
    if (j.contains("detail_distribution")) c.detail_distribution = j.at("detail_distribution").get<std::array<double, 4>>();
    if (j.contains("mode")) c.mode = parse_corpus_mode(j.at("mode").get<std::string>());
    if (j.contains("vocab_concepts")) {
        const auto& v = j.at("vocab_concepts");
        c.vocab_concepts.nouns = v.value("nouns", c.vocab_concepts.nouns);
        c.vocab_concepts.adjectives = v.value("adjectives", c.vocab_concepts.adjectives);
        c.vocab_concepts.verbs = v.value("verbs", c.vocab_concepts.verbs);
    }
    c.paraphrases = j.value("paraphrases", c.paraphrases);
    c.subject_attributes = j.value("subject_attributes", c.subject_attributes);
    c.object_prob = j.value("object_prob", c.object_prob);
    if (j.contains("simpler_depth")) c.simpler_depth = j.at("simpler_depth").get<std::array<double, 3>>();
    return c;
}

bool is_validation_scene(int scene_id) { return scene_id % 10 == 0; }

}  // namespace smile
