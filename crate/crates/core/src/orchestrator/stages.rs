use serde::Serialize;

use super::accumulated::AccumulatedCode;
use super::extract::{extract_code, strip_fenced_blocks};
use super::manager::{parse_manager_json, ManagerOutput};
use super::pipeline::{Orchestrator, PipelineState};
use super::OrchestratorError;
use crate::backend::{estimate_cost, whitespace_tokens, ChatRequest, ChatResponse};
use crate::prompt::{list_placeholders, render, Bindings, Placeholder, PromptError};
use crate::types::{
    validate_module_specs, AgentRole, CodeStage, ConversationHistory, ModuleCode, ModuleSpec,
    ProjectDescription, Review, Usage,
};

/// Review text used when verification is turned off.
pub const DEFAULT_REVIEW: &str = "No review available; make the code production ready.";

/// One completion call, as written to `transcript.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CallRecord {
    pub role: AgentRole,
    pub module: Option<String>,
    /// 1-based round inside a two-agent stage; 0 for single-call stages.
    pub round: u32,
    pub request_message_count: usize,
    pub response: String,
    pub usage: Usage,
    pub attempts: u32,
    pub cost: f64,
}

/// One round of a two-agent stage: the second agent answers, then the first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundOutcome {
    pub round_index: u32,
    /// Reply of the stage's first agent (Dev_1 or Finalized_1).
    pub first_message: String,
    /// Reply of the stage's second agent (Dev_2 or Finalized_2).
    pub second_message: String,
    /// Code of the most recent fenced block in this round, if any.
    pub extracted_code: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairOutcome {
    pub code: ModuleCode,
    pub rounds: Vec<RoundOutcome>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FinalizeOutcome {
    pub code: ModuleCode,
    pub rounds: Vec<RoundOutcome>,
    /// No fenced code came out of the stage; `code` is the pair-stage code.
    pub fell_back: bool,
}

struct Exchange {
    first: ConversationHistory,
    second: ConversationHistory,
    rounds: Vec<RoundOutcome>,
    responses: Vec<String>,
}

impl Exchange {
    fn last_code(&self) -> Option<String> {
        self.responses.iter().rev().find_map(|r| extract_code(r))
    }
}

fn project_bindings(project: &ProjectDescription) -> Bindings {
    Bindings::new()
        .with(Placeholder::ProjectDescription, project.text())
        .with(Placeholder::ProjectDescriptions, project.text())
}

impl Orchestrator<'_> {
    fn call(
        &self,
        role: AgentRole,
        module: Option<&str>,
        round: u32,
        history: &ConversationHistory,
    ) -> Result<ChatResponse, OrchestratorError> {
        let backend_err = |source| OrchestratorError::Backend { role, source };
        let request =
            ChatRequest::from_config(self.config(), history.messages().to_vec()).map_err(backend_err)?;
        let response = self.backend().complete(&request).map_err(backend_err)?;
        let record = CallRecord {
            role,
            module: module.map(str::to_string),
            round,
            request_message_count: request.messages().len(),
            response: response.content.clone(),
            usage: response.usage,
            attempts: response.attempts,
            cost: estimate_cost(response.usage, self.config().pricing_for_model()),
        };
        self.record_call(record)?;
        Ok(response)
    }

    /// Renders a role prompt. When a token budget is configured and the
    /// prompt exceeds it, the oldest modules are dropped from the
    /// accumulated-code binding until it fits or nothing is left to drop.
    fn render_role(
        &self,
        role: AgentRole,
        mut bindings: Bindings,
        accumulated: &AccumulatedCode,
    ) -> Result<String, PromptError> {
        let template = self.templates().get(role);
        if !list_placeholders(template).contains(&Placeholder::AccumulatedCode) {
            return render(template, &bindings);
        }
        let total = accumulated.module_count();
        for skip in 0..=total {
            bindings.insert(Placeholder::AccumulatedCode, accumulated.text_from(skip));
            let rendered = render(template, &bindings)?;
            let fits = match self.config().context_token_budget {
                None => true,
                Some(budget) => whitespace_tokens(&rendered) as usize <= budget,
            };
            if fits || skip == total {
                if skip > 0 {
                    tracing::warn!(%role, dropped = skip, "accumulated code truncated to fit the token budget");
                }
                return Ok(rendered);
            }
        }
        unreachable!("loop always returns on the last iteration")
    }

    pub(super) fn decompose(
        &self,
        project: &ProjectDescription,
    ) -> Result<(ManagerOutput, ConversationHistory), OrchestratorError> {
        let prompt = self.render_role(
            AgentRole::Manager,
            project_bindings(project),
            &AccumulatedCode::new(),
        )?;
        let history = ConversationHistory::new(AgentRole::Manager, prompt);
        let response = self.call(AgentRole::Manager, None, 0, &history)?;
        let mut history = history;
        history.push_assistant(&response.content);

        let output = parse_manager_json(&response.content)?;
        let violations = validate_module_specs(&output.specs);
        if !violations.is_empty() {
            return Err(OrchestratorError::InvalidModules(violations));
        }
        Ok((output, history))
    }

    /// One Manager call; the response is parsed and every spec validated.
    pub fn get_module_descriptions(
        &self,
        project: &ProjectDescription,
    ) -> Result<ManagerOutput, OrchestratorError> {
        self.decompose(project).map(|(output, _)| output)
    }

    /// Runs `rounds` rounds between two agents. Each round the second agent
    /// answers the latest message, then the first agent answers that reply.
    /// Every reply is appended to the author's history as `assistant` and to
    /// the other's as `user`.
    fn exchange(
        &self,
        module: &str,
        (first_role, first_prompt): (AgentRole, String),
        (second_role, second_prompt): (AgentRole, String),
        opening: String,
        rounds: u32,
    ) -> Result<Exchange, OrchestratorError> {
        let mut first = ConversationHistory::new(first_role, first_prompt);
        let mut second = ConversationHistory::new(second_role, second_prompt);
        first.push_assistant(&opening);
        second.push_user(&opening);

        let mut outcomes = Vec::with_capacity(rounds as usize);
        let mut responses = Vec::with_capacity(2 * rounds as usize);
        for round in 1..=rounds {
            let reply = self.call(second_role, Some(module), round, &second)?.content;
            second.push_assistant(&reply);
            first.push_user(&reply);
            responses.push(reply.clone());
            let second_message = reply;

            let reply = self.call(first_role, Some(module), round, &first)?.content;
            first.push_assistant(&reply);
            second.push_user(&reply);
            responses.push(reply.clone());
            let first_message = reply;

            debug_assert_eq!(first.len(), second.len());
            outcomes.push(RoundOutcome {
                round_index: round,
                extracted_code: extract_code(&first_message).or_else(|| extract_code(&second_message)),
                first_message,
                second_message,
            });
        }
        Ok(Exchange {
            first,
            second,
            rounds: outcomes,
            responses,
        })
    }

    /// Dev_1 / Dev_2 pair programming for one module.
    pub fn run_pair_rounds(
        &self,
        spec: &ModuleSpec,
        state: &mut PipelineState,
    ) -> Result<PairOutcome, OrchestratorError> {
        let description = spec.describe();
        let bindings = project_bindings(state.project())
            .with(Placeholder::ModuleDescription, description.clone());
        let dev1 = self.render_role(AgentRole::Dev1, bindings.clone(), state.accumulated())?;
        let dev2 = self.render_role(AgentRole::Dev2, bindings, state.accumulated())?;

        let exchange = self.exchange(
            &spec.name,
            (AgentRole::Dev1, dev1),
            (AgentRole::Dev2, dev2),
            description,
            self.config().pair_rounds,
        )?;
        let code = exchange.last_code();
        state.set_history(exchange.first.clone());
        state.set_history(exchange.second.clone());
        let Some(code) = code else {
            return Err(OrchestratorError::NoCode {
                module: spec.name.clone(),
                transcript: exchange.responses,
            });
        };
        Ok(PairOutcome {
            code: ModuleCode::new(&spec.name, code, CodeStage::Pair)?,
            rounds: exchange.rounds,
        })
    }

    /// One Verification call; the response minus any fenced code becomes the
    /// review.
    pub fn get_verification_review(
        &self,
        spec: &ModuleSpec,
        module_code: &ModuleCode,
        state: &mut PipelineState,
    ) -> Result<Review, OrchestratorError> {
        let bindings = project_bindings(state.project())
            .with(Placeholder::ModuleName, spec.name.clone())
            .with(Placeholder::ModuleCode, module_code.code());
        let prompt = self.render_role(AgentRole::Verification, bindings, state.accumulated())?;
        let mut history = ConversationHistory::new(AgentRole::Verification, prompt);
        let response = self.call(AgentRole::Verification, Some(&spec.name), 0, &history)?;
        history.push_assistant(&response.content);
        state.set_history(history);

        let body = strip_fenced_blocks(&response.content).trim().to_string();
        if body.is_empty() {
            return Err(OrchestratorError::EmptyReview {
                module: spec.name.clone(),
            });
        }
        Ok(Review::new(&spec.name, body)?)
    }

    /// Finalized_1 / Finalized_2 clean-up of the pair-stage code. Falls back to
    /// the pair-stage code when no response carries a fenced block.
    pub fn finalize_code(
        &self,
        spec: &ModuleSpec,
        module_code: &ModuleCode,
        review: &Review,
        state: &mut PipelineState,
    ) -> Result<FinalizeOutcome, OrchestratorError> {
        let bindings = project_bindings(state.project())
            .with(Placeholder::ModuleCode, module_code.code())
            .with(Placeholder::Review, review.body());
        let first = self.render_role(AgentRole::Finalized1, bindings.clone(), state.accumulated())?;
        let second = self.render_role(AgentRole::Finalized2, bindings, state.accumulated())?;
        let opening = format!(
            "Here is the current code of module `{}`:\n\n```python\n{}\n```\n\nReview:\n{}\n\n\
             Please improve the code according to the review and reply with the complete updated module.",
            spec.name,
            module_code.code(),
            review.body()
        );

        let exchange = self.exchange(
            &spec.name,
            (AgentRole::Finalized1, first),
            (AgentRole::Finalized2, second),
            opening,
            self.config().finalize_rounds,
        )?;
        let code = exchange.last_code();
        state.set_history(exchange.first);
        state.set_history(exchange.second);

        let (code, fell_back) = match code {
            Some(code) if !code.trim().is_empty() => (ModuleCode::new(&spec.name, code, CodeStage::Finalized)?, false),
            _ => {
                tracing::warn!(
                    module = %spec.name,
                    "finalization produced no code; keeping the pair-programming code"
                );
                (module_code.clone().into_finalized()?, true)
            }
        };
        if code.line_count() > self.config().module_loc_limit {
            tracing::warn!(
                module = %spec.name,
                lines = code.line_count(),
                limit = self.config().module_loc_limit,
                "module exceeds the per-module line guideline"
            );
        }
        Ok(FinalizeOutcome {
            code,
            rounds: exchange.rounds,
            fell_back,
        })
    }
}
