//! Persistent goals and their reasoning state.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decision::Decision;
use crate::model::{Event, IdGen, Timestamp};

pub const DEFAULT_NOOP_CUTOFF: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    ShortTerm,
    LongTerm,
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskKind::ShortTerm => "short_term",
            TaskKind::LongTerm => "long_term",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskState {
    Active,
    Completed,
    Failed,
    Expired,
}

impl TaskState {
    pub const ALL: [TaskState; 4] = [
        TaskState::Active,
        TaskState::Completed,
        TaskState::Failed,
        TaskState::Expired,
    ];

    pub fn is_terminal(&self) -> bool {
        !matches!(self, TaskState::Active)
    }

    /// Only `active -> {completed, failed, expired}` is legal.
    pub fn can_transition_to(&self, next: TaskState) -> bool {
        *self == TaskState::Active && next.is_terminal()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    pub goal: String,
    pub kind: TaskKind,
    pub state: TaskState,
    pub created_at: Timestamp,
    /// Decision ids, append-only.
    pub history: Vec<String>,
    pub origin_event: String,
    pub consecutive_noops: u32,
}

impl Task {
    /// `goal | kind | decisions so far`
    pub fn summary(&self) -> String {
        format!("{} | {} | {}", self.goal, self.kind, self.history.len())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaskError {
    #[error("task goal must be non-empty")]
    EmptyGoal,
    #[error("event {0} already has an active task")]
    DuplicateOrigin(String),
    #[error("task {0} is not active")]
    NotActive(String),
    #[error("unknown task {0}")]
    UnknownTask(String),
    #[error("illegal transition {from:?} -> {to:?}")]
    IllegalTransition { from: TaskState, to: TaskState },
}

#[derive(Debug)]
pub struct TaskManager {
    tasks: Vec<Task>,
    ids: IdGen,
    noop_cutoff: u32,
}

impl Default for TaskManager {
    fn default() -> Self {
        Self::new(DEFAULT_NOOP_CUTOFF)
    }
}

impl TaskManager {
    pub fn new(noop_cutoff: u32) -> Self {
        Self {
            tasks: Vec::new(),
            ids: IdGen::new("task"),
            noop_cutoff: noop_cutoff.max(1),
        }
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn get(&self, id: &str) -> Option<&Task> {
        self.tasks.iter().find(|t| t.id == id)
    }

    fn get_mut(&mut self, id: &str) -> Result<&mut Task, TaskError> {
        self.tasks
            .iter_mut()
            .find(|t| t.id == id)
            .ok_or_else(|| TaskError::UnknownTask(id.to_string()))
    }

    pub fn spawn_task(
        &mut self,
        goal: impl Into<String>,
        kind: TaskKind,
        origin: &Event,
        created_at: Timestamp,
    ) -> Result<&Task, TaskError> {
        let goal = goal.into();
        if goal.trim().is_empty() {
            return Err(TaskError::EmptyGoal);
        }
        if self
            .tasks
            .iter()
            .any(|t| t.origin_event == origin.id && t.state == TaskState::Active)
        {
            return Err(TaskError::DuplicateOrigin(origin.id.clone()));
        }
        self.tasks.push(Task {
            id: self.ids.next_id(),
            goal,
            kind,
            state: TaskState::Active,
            created_at,
            history: Vec::new(),
            origin_event: origin.id.clone(),
            consecutive_noops: 0,
        });
        Ok(self.tasks.last().expect("just pushed"))
    }

    /// Appends the decision to the task's history. After `noop_cutoff`
    /// consecutive noops the task fails.
    pub fn note_decision(&mut self, task_id: &str, d: &Decision) -> Result<&Task, TaskError> {
        let cutoff = self.noop_cutoff;
        let task = self.get_mut(task_id)?;
        if task.state != TaskState::Active {
            return Err(TaskError::NotActive(task_id.to_string()));
        }
        task.history.push(d.id.clone());
        if d.chosen.is_noop() {
            task.consecutive_noops += 1;
            if task.consecutive_noops >= cutoff {
                task.state = TaskState::Failed;
            }
        } else {
            task.consecutive_noops = 0;
        }
        Ok(task)
    }

    pub fn transition(&mut self, task_id: &str, to: TaskState) -> Result<&Task, TaskError> {
        let task = self.get_mut(task_id)?;
        if !task.state.can_transition_to(to) {
            return Err(TaskError::IllegalTransition {
                from: task.state,
                to,
            });
        }
        task.state = to;
        Ok(task)
    }

    pub fn complete(&mut self, task_id: &str) -> Result<&Task, TaskError> {
        self.transition(task_id, TaskState::Completed)
    }

    pub fn fail(&mut self, task_id: &str) -> Result<&Task, TaskError> {
        self.transition(task_id, TaskState::Failed)
    }

    /// Expires every active short-term task; returns their ids.
    pub fn end_episode(&mut self) -> Vec<String> {
        self.tasks
            .iter_mut()
            .filter(|t| t.kind == TaskKind::ShortTerm && t.state == TaskState::Active)
            .map(|t| {
                t.state = TaskState::Expired;
                t.id.clone()
            })
            .collect()
    }

    /// One-line summaries of active tasks, newest first.
    pub fn active_context(&self) -> Vec<String> {
        let mut active: Vec<&Task> = self
            .tasks
            .iter()
            .filter(|t| t.state == TaskState::Active)
            .collect();
        active.sort_by_key(|t| std::cmp::Reverse(t.created_at));
        active.into_iter().map(Task::summary).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Action, Source};

    fn event(id: &str) -> Event {
        Event {
            id: id.into(),
            ts: Timestamp::default(),
            source: Source::Client,
            intent: "i".into(),
            instruction: String::new(),
            observations: vec![],
            available_actions: vec![],
            context: Default::default(),
        }
    }

    fn decision(id: &str, chosen: Action) -> Decision {
        Decision {
            id: id.into(),
            event_id: "e".into(),
            chosen,
            candidate_count: 1,
            memory_version: 0,
            decided_at: Timestamp::default(),
        }
    }

    #[test]
    fn spawn_registers_active_task() {
        let mut tm = TaskManager::default();
        let t = tm
            .spawn_task("buy tea", TaskKind::ShortTerm, &event("e1"), Timestamp::new(1, 1))
            .unwrap();
        assert_eq!(t.state, TaskState::Active);
        assert_eq!(t.origin_event, "e1");
    }

    #[test]
    fn duplicate_origin_rejected() {
        let mut tm = TaskManager::default();
        let e = event("e1");
        tm.spawn_task("a", TaskKind::ShortTerm, &e, Timestamp::new(1, 1)).unwrap();
        assert_eq!(
            tm.spawn_task("b", TaskKind::LongTerm, &e, Timestamp::new(2, 2))
                .unwrap_err(),
            TaskError::DuplicateOrigin("e1".into())
        );
        assert_eq!(
            tm.spawn_task(" ", TaskKind::LongTerm, &event("e2"), Timestamp::new(2, 2))
                .unwrap_err(),
            TaskError::EmptyGoal
        );
    }

    #[test]
    fn long_term_survives_sweep() {
        let mut tm = TaskManager::default();
        let short = tm
            .spawn_task("s", TaskKind::ShortTerm, &event("e1"), Timestamp::new(1, 1))
            .unwrap()
            .id
            .clone();
        let long = tm
            .spawn_task("l", TaskKind::LongTerm, &event("e2"), Timestamp::new(2, 2))
            .unwrap()
            .id
            .clone();
        assert_eq!(tm.end_episode(), vec![short.clone()]);
        assert_eq!(tm.get(&short).unwrap().state, TaskState::Expired);
        assert_eq!(tm.get(&long).unwrap().state, TaskState::Active);
    }

    #[test]
    fn non_noop_resets_counter() {
        let mut tm = TaskManager::default();
        let id = tm
            .spawn_task("g", TaskKind::ShortTerm, &event("e1"), Timestamp::new(1, 1))
            .unwrap()
            .id
            .clone();
        tm.note_decision(&id, &decision("d1", Action::noop())).unwrap();
        let t = tm.note_decision(&id, &decision("d2", Action::click("x"))).unwrap();
        assert_eq!(t.history, vec!["d1", "d2"]);
        assert_eq!(t.consecutive_noops, 0);
    }

    #[test]
    fn three_noops_fail_the_task() {
        let mut tm = TaskManager::new(3);
        let id = tm
            .spawn_task("g", TaskKind::ShortTerm, &event("e1"), Timestamp::new(1, 1))
            .unwrap()
            .id
            .clone();
        for i in 0..2 {
            let t = tm.note_decision(&id, &decision(&format!("d{i}"), Action::noop())).unwrap();
            assert_eq!(t.state, TaskState::Active);
        }
        let t = tm.note_decision(&id, &decision("d2", Action::noop())).unwrap();
        assert_eq!(t.state, TaskState::Failed);
    }

    #[test]
    fn decisions_on_terminal_tasks_rejected() {
        let mut tm = TaskManager::default();
        let id = tm
            .spawn_task("g", TaskKind::ShortTerm, &event("e1"), Timestamp::new(1, 1))
            .unwrap()
            .id
            .clone();
        tm.complete(&id).unwrap();
        assert_eq!(
            tm.note_decision(&id, &decision("d", Action::noop())).unwrap_err(),
            TaskError::NotActive(id.clone())
        );
        assert!(matches!(
            tm.note_decision("task-99", &decision("d", Action::noop())),
            Err(TaskError::UnknownTask(_))
        ));
    }

    #[test]
    fn exhaustive_transitions() {
        for from in TaskState::ALL {
            for to in TaskState::ALL {
                let mut tm = TaskManager::default();
                let id = tm
                    .spawn_task("g", TaskKind::LongTerm, &event("e"), Timestamp::new(1, 1))
                    .unwrap()
                    .id
                    .clone();
                if from != TaskState::Active {
                    tm.transition(&id, from).unwrap();
                }
                let legal = from == TaskState::Active && to != TaskState::Active;
                assert_eq!(tm.transition(&id, to).is_ok(), legal, "{from:?} -> {to:?}");
                if !legal {
                    assert_eq!(tm.get(&id).unwrap().state, from);
                }
            }
        }
    }

    #[test]
    fn active_context_newest_first() {
        let mut tm = TaskManager::default();
        assert!(tm.active_context().is_empty());
        tm.spawn_task("older", TaskKind::ShortTerm, &event("e1"), Timestamp::new(1, 1)).unwrap();
        tm.spawn_task("newer", TaskKind::LongTerm, &event("e2"), Timestamp::new(2, 2)).unwrap();
        let done = tm
            .spawn_task("done", TaskKind::ShortTerm, &event("e3"), Timestamp::new(3, 3))
            .unwrap()
            .id
            .clone();
        tm.complete(&done).unwrap();
        assert_eq!(
            tm.active_context(),
            vec!["newer | long_term | 0", "older | short_term | 0"]
        );
    }

    #[test]
    fn serializes_snake_case() {
        let mut tm = TaskManager::default();
        tm.spawn_task("g", TaskKind::ShortTerm, &event("e1"), Timestamp::new(1, 1)).unwrap();
        let json = serde_json::to_string(&tm.tasks()[0]).unwrap();
        assert!(json.contains(r#""kind":"short_term""#));
        assert!(json.contains(r#""state":"active""#));
        assert!(json.contains(r#""origin_event":"e1""#));
    }
}
