use crate::numerics::SeededRng;
use crate::{Error, Result};

/// Participants for one leave-one-subject-out fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<u32>,
    pub val: u32,
    pub test: u32,
}

/// Draws a test and a validation participant; everyone else trains.
/// Explicit choices take precedence over the seeded draw.
pub fn loso_split(roster: &[u32], seed: u64, val: Option<u32>, test: Option<u32>) -> Result<Split> {
    let mut ids = roster.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() < 3 {
        return Err(Error::TooFewParticipants(ids.len()));
    }
    for id in [val, test].into_iter().flatten() {
        if !ids.contains(&id) {
            return Err(Error::InvalidConfig(format!(
                "participant {id} is not in the roster {ids:?}"
            )));
        }
    }
    if val.is_some() && val == test {
        return Err(Error::InvalidConfig(
            "validation and test participant must differ".into(),
        ));
    }
    let mut order = ids.clone();
    SeededRng::new(seed).child_named("loso").shuffle(&mut order);
    let test = test.unwrap_or_else(|| *order.iter().find(|&&p| Some(p) != val).unwrap());
    let val = val.unwrap_or_else(|| *order.iter().find(|&&p| p != test).unwrap());
    let train = ids.into_iter().filter(|&p| p != val && p != test).collect();
    Ok(Split { train, val, test })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn nineteen_participants() {
        let roster: Vec<u32> = (1..=19).collect();
        let s = loso_split(&roster, 3, None, None).unwrap();
        assert_eq!(s.train.len(), 17);
        assert_ne!(s.val, s.test);
        assert_eq!(s, loso_split(&roster, 3, None, None).unwrap());
    }

    #[test]
    fn too_few() {
        assert_eq!(
            loso_split(&[1, 2], 0, None, None).unwrap_err().kind(),
            "too-few-participants"
        );
        assert_eq!(
            loso_split(&[1, 1, 2], 0, None, None).unwrap_err().kind(),
            "too-few-participants"
        );
    }

    #[test]
    fn explicit_choices() {
        let s = loso_split(&[1, 2, 3, 4], 0, Some(4), Some(1)).unwrap();
        assert_eq!(
            s,
            Split {
                train: vec![2, 3],
                val: 4,
                test: 1
            }
        );
        assert!(loso_split(&[1, 2, 3], 0, Some(2), Some(2)).is_err());
        assert!(loso_split(&[1, 2, 3], 0, Some(7), None).is_err());
    }

    proptest! {
        #[test]
        fn partitions_roster(n in 3u32..30, seed in any::<u64>()) {
            let roster: Vec<u32> = (0..n).collect();
            let s = loso_split(&roster, seed, None, None).unwrap();
            let mut all = s.train.clone();
            all.push(s.val);
            all.push(s.test);
            all.sort_unstable();
            prop_assert_eq!(all, roster);
            prop_assert_ne!(s.val, s.test);
        }
    }
}
