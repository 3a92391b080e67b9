#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "llmcal/types.hpp"

namespace llmcal {

// Task wording for the four prompt families. Format strings carry their own
// joining whitespace; placeholders: {text} {label} {index} {count} {tag}
// {noun} {plural}.
struct TaskTemplate {
    std::string task_definition;
    std::string item_noun;    // "question"
    std::string item_plural;  // "questions"
    std::string item_tag;     // "Question" (the ### marker word)
    std::string single_query_format;
    std::string answer_prefix_single;
    std::string demo_intro;
    std::string demo_item_format;
    std::string demo_answer_intro;
    std::string demo_answer_format;
    std::string comparative_intro_format;
    std::string comparative_item_format;
    std::string answer_prefix_comparative;
};

// Built-in wordings for the TREC question-type and AGNews topic tasks.
TaskTemplate trec_template();
TaskTemplate agnews_template();

struct DemoExample {
    Sample sample;
    std::string label_name;
};

struct PromptSpec {
    std::string text;
    InferenceMode mode = InferenceMode::Independent;
    int shots = 0;
    std::vector<std::string> reference_ids;
    int target_position = 1;
    std::vector<std::string> demo_ids;
    std::string target_id;
    int item_count = 1;  // inputs enumerated in the prompt (1 + references)
};

PromptSpec build_prompt(const TaskTemplate& tmpl, const Sample& target,
                        const std::vector<DemoExample>& demos, const std::vector<Sample>& refs,
                        int target_position);

// Uniform draw without replacement, excluding the target id.
std::vector<Sample> sample_references(const std::vector<Sample>& pool, int count,
                                      const std::string& exclude_id, std::uint64_t seed);

// J independent seeded draws of `count` references each.
std::vector<std::vector<Sample>> reference_set_schedule(const std::vector<Sample>& pool, int count,
                                                        int j_sets, const std::string& exclude_id,
                                                        std::uint64_t master_seed);

// Structural facts recovered from rendered text; used to check round-trip
// invariants.
struct PromptStructure {
    InferenceMode mode = InferenceMode::Independent;
    int item_count = 0;
    int target_position = 0;  // 0 when target text not found
};

PromptStructure parse_prompt_structure(const TaskTemplate& tmpl, const std::string& text,
                                       const std::string& target_text);

}  // namespace llmcal
