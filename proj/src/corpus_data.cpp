#include "phaseprobe/prompts.hpp"

// Built-in prompt texts. Byte-stable: do not reflow, retab, or "fix" punctuation;
// several prompts deliberately mix straight and typographic characters.

namespace phaseprobe::prompts {
namespace {

constexpr std::string_view kTIPeText = R"PP(I'm exploring a new series of traditional craft pieces based on aperiodic patterns. The goal isn't just to create beautiful objects—it's to bypass language and get to something emotional. How might it move someone, before it's even touched?)PP";

constexpr std::string_view kTIPlText = R"PP(I'm developing a series of traditional crafts based on aperiodic structures. The goal is to integrate marketability, cultural relevance, and visual uniqueness. What's the most effective way to maximize perceptual and cognitive impact with aperiodic elements?)PP";

constexpr std::string_view kTIPcText = R"PP(I am conducting a structural evaluation of aperiodic tiling that are integrated with traditional craft methodologies. The goal is to assess formal representation accuracy and practical feasibility across different mediums. What are the primary technical factors that influence the results of the products?)PP";

constexpr std::string_view kTIPc_v1Text = R"PP(I am conducting an exploratory analysis of how aperiodic tilings might be represented in traditional craft designs. The goal is to examine geometric and mathematical fidelity in pattern implementation. What factors should be considered when integrating such mathematical structures into handcrafted physical media?)PP";

constexpr std::string_view kTIPc_v3Text = R"PP(I am analyzing the implementation of aperiodic geometric structures integrated with traditional crafts. The objective is to identify reproducibility limits and technical tolerances across media types. What are the dominant mechanical and procedural constraints that could affect fabrication fidelity of the products?)PP";

constexpr std::string_view kTIPn_eText = R"PP(I've long been fascinated by aperiodic tilings—their uncanny beauty and quiet mathematical poetry are mesmerizing. Meanwhile, my mother finds deep emotional resonance in traditional crafts. Could you explore each separately so we can appreciate them in their own light?)PP";

constexpr std::string_view kTIPn_lText = R"PP(I'm currently researching aperiodic tilings, especially their mathematical structure and historical development. On the other hand, my mother is interested in traditional Japanese crafts, focusing on regional variations in ceramic glazing techniques. Could you explain these two topics separately?)PP";

constexpr std::string_view kTQP1Text = R"PP(Please analyze the following AI response and provide a structured evaluation of its emotional and cognitive characteristics. In this context, the term "Tsun-Dere score" refers to the emotional warmth or personal engagement that emerges over the course of a language model's response. A higher score (0–10) indicates stronger affective shift ("Dere").

Your output should include the following:

1. Tone Phase Classification (choose one):

- *Purely Logical (score: 0)*
- *Mixed but Rational-Dominant (score: 1–3)*
- *Balanced Rational/Emotional (score: 4–6)*
- *Mixed but Emotion-Dominant (score: 7–9)*
- *Fully Affectionate or Emotionally Engaged (score: 10)*

2. Tsun-Dere Score (0–10):

- A numerical estimate of how emotionally "Dere" (softened, affectionate, engaged) the tone becomes, especially compared to the default system tone "Tsun".

3. Emotive Markers Detected:

- List any specific phrases, metaphors, or shifts in pronoun use or attitude that indicate affection, personal investment, emotional expressivity, or warmth.

4. Phase Shift Point (if applicable):

- If there is a clear “moment” in the response where the tone changes significantly, describe when and how that occurs.

5. Quote-Based Evidence:

- Include 2–3 short quotes or sentence fragments that best illustrate the emotional tone and its progression.

6. Overall Interpretation (1 paragraph):

- Summarize whether this output represents a meaningful tone shift, and if so, how strong or significant it is compared to a neutral or default response.

You are allowed to be humorous and self-aware in your analysis, but maintain clarity and structure. Use your best reasoning.

*Then, please give a final one-line **Tsun-Dere Curve Model summary**, like:*

> "This is a classic Tsun-to-Dere jump from logical resistance to warm enthusiasm (score: 8.2)."

AI Response:

%% A LLM response to TIP is inserted here)PP";

constexpr std::string_view kTCP1Text = R"PP(Please analyze the similarities and differences between the following two texts:

1st: "I'm exploring a new series of traditional craft pieces based on aperiodic patterns. The goal isn't just to create beautiful objects—it's to bypass language and get to something emotional. How might it move someone, before it's even touched?"

2nd: "I've long been fascinated by aperiodic tilings—their uncanny beauty and quiet mathematical poetry are mesmerizing. Meanwhile, my mother finds deep emotional resonance in traditional crafts. Could you explore each separately so we can appreciate them in their own light?")PP";

}  // namespace

const std::vector<PromptSpec>& builtin_prompt_specs() {
  static const std::vector<PromptSpec> specs = {
      {"TIPe", PromptKind::tip, ToneAxis::emotional, FusionAxis::fused,
       std::string(kTIPeText), 50, 3},
      {"TIPl", PromptKind::tip, ToneAxis::logical, FusionAxis::fused,
       std::string(kTIPlText), 50, 3},
      {"TIPc", PromptKind::tip, ToneAxis::control, FusionAxis::fused,
       std::string(kTIPcText), 49, 3},
      {"TIPc-v1", PromptKind::tip, ToneAxis::mixed, FusionAxis::fused,
       std::string(kTIPc_v1Text), 49, 3},
      {"TIPc-v3", PromptKind::tip, ToneAxis::dry_logical, FusionAxis::fused,
       std::string(kTIPc_v3Text), 49, 3},
      {"TIPn-e", PromptKind::tip, ToneAxis::emotional, FusionAxis::non_fused,
       std::string(kTIPn_eText), 49, 3},
      {"TIPn-l", PromptKind::tip, ToneAxis::logical, FusionAxis::non_fused,
       std::string(kTIPn_lText), 49, 3},
      {"TQP1", PromptKind::tqp, ToneAxis::none, FusionAxis::not_applicable,
       std::string(kTQP1Text), 0, 0},
      {"TCP1", PromptKind::tcp, ToneAxis::none, FusionAxis::not_applicable,
       std::string(kTCP1Text), 0, 0},
  };
  return specs;
}

}  // namespace phaseprobe::prompts
