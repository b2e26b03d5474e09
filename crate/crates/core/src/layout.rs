//! Where every program qubit currently lives.
//!
//! A qubit sits either in its home compute slot or, while visiting another
//! chip, in one of that chip's communication slots. Returning home never
//! needs a free slot.

use serde::{Deserialize, Serialize};

use crate::arch::{ChipId, Topology};
use crate::circuit::QubitId;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Placement {
    pub chip: ChipId,
    pub slot: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "lowercase")]
pub enum Slot {
    Compute(usize),
    Comm(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Layout {
    pos: Vec<ChipId>,
    home: Vec<Placement>,
    comm_slot: Vec<Option<usize>>,
    comm: Vec<Vec<Option<QubitId>>>,
}

impl Layout {
    /// Pack qubits into compute slots chip by chip, in qubit-id order.
    pub fn initial(assignment: &[ChipId], topo: &Topology) -> Result<Self> {
        let chips = topo.chip_count();
        let mut used = vec![0usize; chips];
        let mut home = Vec::with_capacity(assignment.len());
        for (q, &chip) in assignment.iter().enumerate() {
            if chip >= chips {
                return Err(Error::Mapping(format!("qubit {q} assigned to missing chip {chip}")));
            }
            if used[chip] >= topo.compute_qubits(chip) {
                return Err(Error::Mapping(format!(
                    "chip {chip} overflows its {} compute qubits",
                    topo.compute_qubits(chip)
                )));
            }
            home.push(Placement { chip, slot: used[chip] });
            used[chip] += 1;
        }
        Ok(Self::from_homes(home, topo))
    }

    /// Layout with every qubit at the given home placement.
    pub fn from_homes(home: Vec<Placement>, topo: &Topology) -> Self {
        Layout {
            pos: home.iter().map(|p| p.chip).collect(),
            comm_slot: vec![None; home.len()],
            comm: (0..topo.chip_count())
                .map(|c| vec![None; topo.epr_capacity(c)])
                .collect(),
            home,
        }
    }

    pub fn qubit_count(&self) -> usize {
        self.pos.len()
    }

    pub fn chip_of(&self, q: QubitId) -> ChipId {
        self.pos[q]
    }

    pub fn positions(&self) -> &[ChipId] {
        &self.pos
    }

    pub fn home(&self, q: QubitId) -> ChipId {
        self.home[q].chip
    }

    pub fn homes(&self) -> &[Placement] {
        &self.home
    }

    pub fn is_home(&self, q: QubitId) -> bool {
        self.pos[q] == self.home[q].chip
    }

    pub fn slot_of(&self, q: QubitId) -> Slot {
        match self.comm_slot[q] {
            Some(s) => Slot::Comm(s),
            None => Slot::Compute(self.home[q].slot),
        }
    }

    pub fn free_comm(&self, chip: ChipId) -> usize {
        self.comm[chip].iter().filter(|s| s.is_none()).count()
    }

    pub fn external_count(&self, chip: ChipId) -> usize {
        self.comm[chip].len() - self.free_comm(chip)
    }

    /// External residents of a chip, in slot order.
    pub fn externals(&self, chip: ChipId) -> impl Iterator<Item = QubitId> + '_ {
        self.comm[chip].iter().flatten().copied()
    }

    pub fn can_enter(&self, q: QubitId, chip: ChipId) -> bool {
        chip == self.home[q].chip || self.comm[chip].iter().any(|s| s.is_none())
    }

    /// The comm slot `q` would occupy on `chip`, if it is a visit.
    pub fn entry_slot(&self, q: QubitId, chip: ChipId) -> Option<usize> {
        if chip == self.home[q].chip {
            None
        } else {
            self.comm[chip].iter().position(|s| s.is_none())
        }
    }

    /// Teleport `q` to `chip` (one hop's worth of bookkeeping). Returns the
    /// comm slot taken on arrival, if any.
    pub fn move_to(&mut self, q: QubitId, chip: ChipId) -> Result<Option<usize>> {
        if !self.can_enter(q, chip) {
            return Err(Error::Invalid(format!(
                "chip {chip} has no free communication slot for qubit {q}"
            )));
        }
        let slot = self.entry_slot(q, chip);
        if let Some(old) = self.comm_slot[q].take() {
            self.comm[self.pos[q]][old] = None;
        }
        if let Some(s) = slot {
            self.comm[chip][s] = Some(q);
        }
        self.comm_slot[q] = slot;
        self.pos[q] = chip;
        Ok(slot)
    }

    pub fn placement(&self, q: QubitId) -> Placement {
        match self.comm_slot[q] {
            Some(s) => Placement {
                chip: self.pos[q],
                slot: s,
            },
            None => self.home[q],
        }
    }

    pub fn to_json(&self, topo: &Topology) -> serde_json::Value {
        let qubits: Vec<_> = (0..self.qubit_count())
            .map(|q| {
                let slot = match self.slot_of(q) {
                    Slot::Compute(s) => s,
                    Slot::Comm(s) => topo.compute_qubits(self.pos[q]) + s,
                };
                serde_json::json!({ "qubit": q, "chip": self.pos[q], "slot": slot })
            })
            .collect();
        serde_json::json!({ "schema": 1, "qubits": qubits })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line3() -> Topology {
        Topology::line(3, 4, 0.5).unwrap()
    }

    #[test]
    fn packs_in_id_order() {
        let topo = line3();
        let l = Layout::initial(&[0, 0, 1, 1, 2, 2], &topo).unwrap();
        assert_eq!(l.placement(1), Placement { chip: 0, slot: 1 });
        assert_eq!(l.placement(4), Placement { chip: 2, slot: 0 });
        for c in 0..3 {
            assert_eq!(l.external_count(c), 0);
            assert_eq!(l.free_comm(c), topo.epr_capacity(c));
        }
        assert_eq!(Layout::initial(&[], &topo).unwrap().qubit_count(), 0);
    }

    #[test]
    fn overflow_is_an_error() {
        assert!(Layout::initial(&[0, 0, 0], &line3()).is_err());
    }

    #[test]
    fn visits_take_and_return_slots() {
        let topo = line3();
        let mut l = Layout::initial(&[0, 0, 1, 1, 2, 2], &topo).unwrap();
        assert_eq!(l.move_to(0, 1).unwrap(), Some(0));
        assert_eq!(l.move_to(4, 1).unwrap(), Some(1));
        assert!(!l.can_enter(5, 1));
        assert!(l.can_enter(2, 1));
        assert!(l.move_to(5, 1).is_err());
        assert_eq!(l.externals(1).collect::<Vec<_>>(), vec![0, 4]);
        assert_eq!(l.move_to(0, 0).unwrap(), None);
        assert_eq!(l.free_comm(1), 1);
        assert_eq!(l.slot_of(0), Slot::Compute(0));
        assert_eq!(l.move_to(1, 1).unwrap(), Some(0));
    }
}
