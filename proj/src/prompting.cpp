#include "llmcal/prompting.hpp"

#include <algorithm>

#include "llmcal/errors.hpp"
#include "llmcal/rng.hpp"

namespace llmcal {

namespace {

std::string substitute(std::string format,
                       const std::vector<std::pair<std::string, std::string>>& slots) {
    for (const auto& [key, value] : slots) {
        const std::string pattern = "{" + key + "}";
        std::size_t pos = 0;
        while ((pos = format.find(pattern, pos)) != std::string::npos) {
            format.replace(pos, pattern.size(), value);
            pos += value.size();
        }
    }
    if (format.find('{') != std::string::npos) {
        throw Error(ErrorCode::Argument, "unresolved placeholder in template: " + format);
    }
    return format;
}

}  // namespace

TaskTemplate trec_template() {
    TaskTemplate t;
    t.task_definition =
        "A question can be one of the following six types. ###Types: Abbreviation, Entity, "
        "Description and abstract concept, Human being, Location, Numeric value.";
    t.item_noun = "question";
    t.item_plural = "questions";
    t.item_tag = "Question";
    t.single_query_format = " For the given question, ###Question: {text} ";
    t.answer_prefix_single = "The most suitable type for the given question is: ";
    t.demo_intro = " For instance, for the following example questions";
    t.demo_item_format = "###Example Question {index}: {text}. ";
    t.demo_answer_intro = "The most suitable types should be:";
    t.demo_answer_format = "{index}). {label}.";
    t.comparative_intro_format = " For the following {count} {plural}: ";
    t.comparative_item_format = "###{tag} {index}:{text} ";
    t.answer_prefix_comparative =
        "By comparing them, we know the most suitable types for each of these {count} {plural}, "
        "respectively, are: ";
    return t;
}

TaskTemplate agnews_template() {
    TaskTemplate t;
    t.task_definition =
        "A news description topic can be one of the following four types. ###Types: World, "
        "Sports, Business, Sci/Tech.";
    t.item_noun = "news description";
    t.item_plural = "news descriptions";
    t.item_tag = "News Description";
    t.single_query_format = " For the given news description, ###News Description: {text} ";
    t.answer_prefix_single = "The most suitable type for the given news description is: ";
    t.demo_intro = " For instance, for the following example news descriptions";
    t.demo_item_format = "###Example News Description {index}: {text}. ";
    t.demo_answer_intro = "The most suitable types should be:";
    t.demo_answer_format = "{index}). {label}.";
    t.comparative_intro_format = " For the following {count} {plural}: ";
    t.comparative_item_format = "###{tag} {index}: {text}. ";
    t.answer_prefix_comparative =
        "By comparing them, we know the most suitable types for each of these {count} {plural}, "
        "respectively, are: ";
    return t;
}

PromptSpec build_prompt(const TaskTemplate& tmpl, const Sample& target,
                        const std::vector<DemoExample>& demos, const std::vector<Sample>& refs,
                        int target_position) {
    const int item_count = 1 + static_cast<int>(refs.size());
    if (target_position < 1 || target_position > item_count) {
        throw Error(ErrorCode::Argument,
                    "target_position " + std::to_string(target_position) + " outside [1, " +
                        std::to_string(item_count) + "]");
    }
    for (const auto& demo : demos) {
        if (demo.label_name.empty()) {
            throw Error(ErrorCode::Argument, "demo without label: " + demo.sample.id);
        }
    }

    PromptSpec spec;
    spec.mode = refs.empty() ? InferenceMode::Independent : InferenceMode::Comparative;
    spec.shots = static_cast<int>(demos.size());
    spec.target_position = target_position;
    spec.target_id = target.id;
    spec.item_count = item_count;
    for (const auto& r : refs) spec.reference_ids.push_back(r.id);
    for (const auto& d : demos) spec.demo_ids.push_back(d.sample.id);

    std::string text = tmpl.task_definition;

    if (!demos.empty()) {
        text += tmpl.demo_intro;
        for (std::size_t i = 0; i < demos.size(); ++i) {
            text += substitute(tmpl.demo_item_format, {{"index", std::to_string(i + 1)},
                                                       {"text", demos[i].sample.text}});
        }
        text += tmpl.demo_answer_intro;
        for (std::size_t i = 0; i < demos.size(); ++i) {
            if (i > 0) text += " ";
            text += substitute(tmpl.demo_answer_format,
                               {{"index", std::to_string(i + 1)}, {"label", demos[i].label_name}});
        }
    }

    const std::string count_str = std::to_string(item_count);
    if (spec.mode == InferenceMode::Independent) {
        text += substitute(tmpl.single_query_format, {{"text", target.text}});
        text += tmpl.answer_prefix_single;
    } else {
        // Target inserted at target_position; references keep their drawn order.
        std::vector<const Sample*> items;
        std::size_t ref_idx = 0;
        for (int pos = 1; pos <= item_count; ++pos) {
            if (pos == target_position) {
                items.push_back(&target);
            } else {
                items.push_back(&refs[ref_idx++]);
            }
        }
        text += substitute(tmpl.comparative_intro_format,
                           {{"count", count_str}, {"plural", tmpl.item_plural}});
        for (int pos = 1; pos <= item_count; ++pos) {
            text += substitute(tmpl.comparative_item_format,
                               {{"tag", tmpl.item_tag},
                                {"index", std::to_string(pos)},
                                {"text", items[pos - 1]->text}});
        }
        text += substitute(tmpl.answer_prefix_comparative,
                           {{"count", count_str}, {"plural", tmpl.item_plural}});
    }

    spec.text = std::move(text);
    return spec;
}

std::vector<Sample> sample_references(const std::vector<Sample>& pool, int count,
                                      const std::string& exclude_id, std::uint64_t seed) {
    std::vector<const Sample*> candidates;
    for (const auto& s : pool) {
        if (s.id != exclude_id) candidates.push_back(&s);
    }
    if (static_cast<int>(candidates.size()) < count) {
        throw Error(ErrorCode::InsufficientData,
                    "reference pool has " + std::to_string(candidates.size()) +
                        " usable samples; need " + std::to_string(count));
    }
    Rng rng(seed);
    // partial Fisher-Yates; the first `count` slots are the draw, in order
    for (int i = 0; i < count; ++i) {
        const std::size_t j = i + rng.bounded(candidates.size() - i);
        std::swap(candidates[i], candidates[j]);
    }
    std::vector<Sample> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) out.push_back(*candidates[i]);
    return out;
}

std::vector<std::vector<Sample>> reference_set_schedule(const std::vector<Sample>& pool, int count,
                                                        int j_sets, const std::string& exclude_id,
                                                        std::uint64_t master_seed) {
    if (j_sets < 1) throw Error(ErrorCode::Argument, "J must be >= 1");
    std::vector<std::vector<Sample>> out;
    out.reserve(j_sets);
    for (int j = 1; j <= j_sets; ++j) {
        out.push_back(sample_references(pool, count, exclude_id,
                                        derive_seed(master_seed, "refset", j)));
    }
    return out;
}

PromptStructure parse_prompt_structure(const TaskTemplate& tmpl, const std::string& text,
                                       const std::string& target_text) {
    PromptStructure ps;
    const std::string comparative_marker =
        tmpl.answer_prefix_comparative.substr(0, tmpl.answer_prefix_comparative.find('{'));
    ps.mode = text.find(comparative_marker) != std::string::npos ? InferenceMode::Comparative
                                                                 : InferenceMode::Independent;
    const std::size_t target_at = text.find(target_text);
    if (ps.mode == InferenceMode::Independent) {
        ps.item_count = 1;
        ps.target_position = target_at != std::string::npos ? 1 : 0;
        return ps;
    }
    int count = 0;
    std::size_t last_before_target = 0;
    for (int i = 1;; ++i) {
        const std::string marker = substitute(
            tmpl.comparative_item_format.substr(0, tmpl.comparative_item_format.find("{text}")),
            {{"tag", tmpl.item_tag}, {"index", std::to_string(i)}});
        const std::size_t at = text.find(marker);
        if (at == std::string::npos) break;
        ++count;
        if (target_at != std::string::npos && at < target_at) last_before_target = i;
    }
    ps.item_count = count;
    ps.target_position = target_at != std::string::npos ? static_cast<int>(last_before_target) : 0;
    return ps;
}

}  // namespace llmcal
