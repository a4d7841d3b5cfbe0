//! Versioned little-endian dump.
//!
//! Layout: magic `COMDPBIN`, `u32` version, `u8` kind, then `u64` state
//! count, action count, depth, initial and absorbing indices, `f64` penalty,
//! the transition table (`u32` per entry, row-major), the reward table
//! (`f64`), the layer table (`u32`, `u32::MAX` for the absorbing state) and
//! one final-flag byte per state. Labels are not stored.

use std::io::{Read, Write};

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::{Mdp, NO_LAYER};
use crate::error::{Error, Result};
use crate::problems::ProblemKind;

const MAGIC: &[u8; 8] = b"COMDPBIN";
const VERSION: u32 = 1;

fn kind_code(kind: ProblemKind) -> u8 {
    match kind {
        ProblemKind::Ksp => 0,
        ProblemKind::Tsp => 1,
        ProblemKind::Spp => 2,
    }
}

impl Mdp {
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(MAGIC)?;
        out.write_u32::<LE>(VERSION)?;
        out.write_u8(kind_code(self.kind))?;
        for v in [self.state_count(), self.actions, self.depth, self.initial, self.absorbing] {
            out.write_u64::<LE>(v as u64)?;
        }
        out.write_f64::<LE>(self.penalty)?;
        for &t in &self.next {
            out.write_u32::<LE>(t)?;
        }
        for &r in &self.reward {
            out.write_f64::<LE>(r)?;
        }
        for &l in &self.layer {
            out.write_u32::<LE>(l)?;
        }
        for &f in &self.is_final {
            out.write_u8(f as u8)?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Mdp> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not an MDP dump".into()));
        }
        let version = input.read_u32::<LE>()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let kind = match input.read_u8()? {
            0 => ProblemKind::Ksp,
            1 => ProblemKind::Tsp,
            2 => ProblemKind::Spp,
            k => return Err(Error::Format(format!("unknown kind code {k}"))),
        };
        let mut header = [0usize; 5];
        for h in &mut header {
            *h = usize::try_from(input.read_u64::<LE>()?)
                .map_err(|_| Error::Format("count overflows usize".into()))?;
        }
        let [states, actions, depth, initial, absorbing] = header;
        let entries = states
            .checked_mul(actions)
            .filter(|&e| e <= u32::MAX as usize * 64)
            .ok_or_else(|| Error::Format("table size overflow".into()))?;
        if initial >= states || absorbing >= states || actions == 0 {
            return Err(Error::Format("header indices out of range".into()));
        }
        let penalty = input.read_f64::<LE>()?;
        let mut next = vec![0u32; entries];
        input.read_u32_into::<LE>(&mut next)?;
        if next.iter().any(|&t| t as usize >= states) {
            return Err(Error::Format("transition target out of range".into()));
        }
        let mut reward = vec![0f64; entries];
        input.read_f64_into::<LE>(&mut reward)?;
        let mut layer = vec![0u32; states];
        input.read_u32_into::<LE>(&mut layer)?;
        if layer.iter().enumerate().any(|(s, &l)| (l == NO_LAYER) != (s == absorbing)) {
            return Err(Error::Format("layer table disagrees with absorbing index".into()));
        }
        let mut flags = vec![0u8; states];
        input.read_exact(&mut flags)?;
        Ok(Mdp {
            kind,
            depth,
            actions,
            initial,
            absorbing,
            penalty,
            next,
            reward,
            layer,
            is_final: flags.into_iter().map(|f| f != 0).collect(),
            labels: Vec::new(),
        })
    }
}

#[cfg(test)]
mod tests {
    use crate::mdp::{build_mdp, Mdp};
    use crate::problems::{generate, ProblemKind};

    #[test]
    fn dump_roundtrips_without_labels() {
        let mdp = build_mdp(&generate(ProblemKind::Tsp, 5, 2).unwrap()).unwrap();
        let mut bytes = Vec::new();
        mdp.write_binary(&mut bytes).unwrap();
        let back = Mdp::read_binary(bytes.as_slice()).unwrap();
        assert_eq!(back.next, mdp.next);
        assert_eq!(back.reward, mdp.reward);
        assert_eq!(back.layer, mdp.layer);
        assert_eq!(back.is_final, mdp.is_final);
        assert_eq!((back.initial, back.absorbing, back.depth), (mdp.initial, mdp.absorbing, mdp.depth));
        assert!(back.labels.is_empty());
    }

    #[test]
    fn garbage_is_rejected() {
        assert!(Mdp::read_binary(&b"COMDPBIX...."[..]).is_err());
        let mdp = build_mdp(&generate(ProblemKind::Ksp, 3, 2).unwrap()).unwrap();
        let mut bytes = Vec::new();
        mdp.write_binary(&mut bytes).unwrap();
        bytes.truncate(bytes.len() - 1);
        assert!(Mdp::read_binary(bytes.as_slice()).is_err());
    }
}
