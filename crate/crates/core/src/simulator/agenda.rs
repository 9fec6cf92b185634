use serde::{Deserialize, Serialize};

use crate::acts::{Quadruple, UserGoal};
use crate::schema::{INFORM, REQUEST, REQUEST_VALUE};

/// LIFO stack of pending user acts. The top of the stack is the last element.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Agenda {
    items: Vec<Quadruple>,
}

impl Agenda {
    /// Requests go in first and constraint informs last, so informs pop first.
    /// Within each group items pop in (domain, slot) lexicographic order.
    pub fn from_goal(goal: &UserGoal) -> Self {
        let mut agenda = Agenda::default();
        let requests: Vec<Quadruple> = goal
            .requests
            .iter()
            .flat_map(|(d, slots)| {
                slots
                    .iter()
                    .map(move |s| Quadruple::new(d, REQUEST, s, REQUEST_VALUE))
            })
            .collect();
        let informs: Vec<Quadruple> = goal
            .constraints
            .iter()
            .flat_map(|(d, cs)| cs.iter().map(move |(s, v)| Quadruple::new(d, INFORM, s, v)))
            .collect();
        for q in requests.into_iter().rev() {
            agenda.push(q);
        }
        for q in informs.into_iter().rev() {
            agenda.push(q);
        }
        agenda
    }

    /// Pushes `item` on top; an identical pending item is moved rather than duplicated.
    pub fn push(&mut self, item: Quadruple) {
        self.items.retain(|q| q != &item);
        self.items.push(item);
    }

    pub fn pop(&mut self) -> Option<Quadruple> {
        self.items.pop()
    }

    pub fn pop_many(&mut self, k: usize) -> Vec<Quadruple> {
        let mut out = Vec::with_capacity(k);
        while out.len() < k {
            match self.items.pop() {
                Some(q) => out.push(q),
                None => break,
            }
        }
        out
    }

    pub fn top(&self) -> Option<&Quadruple> {
        self.items.last()
    }

    pub fn remove_where(&mut self, pred: impl Fn(&Quadruple) -> bool) {
        self.items.retain(|q| !pred(q));
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Items from top to bottom.
    pub fn iter_top_down(&self) -> impl Iterator<Item = &Quadruple> {
        self.items.iter().rev()
    }
}
