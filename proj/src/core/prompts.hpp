#pragma once

#include <map>
#include <string>
#include <string_view>

namespace gems {

using PromptSlots = std::map<std::string, std::string>;

struct RenderedPrompt {
  std::string system;
  std::string user;
};

// Substitutes {{name}} markers. A line whose slot is absent or empty is
// dropped entirely. Multi-line values start on their own line.
std::string render_template(std::string_view text, const PromptSlots& slots);

// Templates for tutorial, movements, stimulation, naive and checkpoint are
// compiled into the library; throws InvalidArgument for other names.
const std::string& prompt_template(std::string_view stage);
RenderedPrompt render_prompt(std::string_view stage, const PromptSlots& slots);

}  // namespace gems
