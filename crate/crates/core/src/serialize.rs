//! JSON-friendly mirrors of the operator and protocol containers.
//!
//! Complex entries are written as `[re, im]` pairs and matrices as
//! row-major nested arrays, so the files stay readable and castable from
//! any JSON stack.  Unpacking routes everything through the ordinary
//! validating constructors (at the solver tolerance, since serialized
//! protocols usually come out of the optimizer), so a hand-edited file
//! that breaks positivity or completeness is rejected rather than
//! propagated.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::protocols::QuantumRac;
use crate::quantum::{ChoiState, Povm};
use crate::scenario::{
    ClassicalProtocol, MessageKind, Protocol, QuantumProtocol, ResourceSpec,
};
use crate::tensor::{Dims, Operator, C64};
use crate::tol;

/// A dense operator: subsystem dimensions plus a row-major matrix of
/// `[re, im]` entries.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OperatorJson {
    pub dims: Vec<usize>,
    pub rows: Vec<Vec<[f64; 2]>>,
}

impl OperatorJson {
    pub fn pack(op: &Operator) -> Self {
        let d = op.dim();
        let rows = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| {
                        let z = op.matrix()[(i, j)];
                        [z.re, z.im]
                    })
                    .collect()
            })
            .collect();
        OperatorJson { dims: op.dims().factors().to_vec(), rows }
    }

    pub fn unpack(&self) -> Result<Operator> {
        let dims = if self.dims.is_empty() {
            Dims::scalar()
        } else {
            Dims::new(self.dims.clone())?
        };
        let d = dims.total();
        if self.rows.len() != d || self.rows.iter().any(|r| r.len() != d) {
            return Err(crate::error::Error::dim(format!(
                "matrix is not {d}×{d} as its dims declare"
            )));
        }
        let m = DMatrix::from_fn(d, d, |i, j| {
            let [re, im] = self.rows[i][j];
            C64::new(re, im)
        });
        Operator::new(dims, m)
    }
}

/// A channel in Choi form: the Choi operator plus how many of its leading
/// factors are the output space.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ChoiJson {
    pub n_out: usize,
    pub operator: OperatorJson,
}

impl ChoiJson {
    pub fn pack(choi: &ChoiState) -> Self {
        ChoiJson {
            n_out: choi.out_dims().len(),
            operator: OperatorJson::pack(choi.operator()),
        }
    }

    pub fn unpack(&self) -> Result<ChoiState> {
        ChoiState::with_tolerance(self.operator.unpack()?, self.n_out, tol::SERIALIZED)
    }
}

fn pack_povm(povm: &Povm) -> Vec<OperatorJson> {
    povm.elements().iter().map(OperatorJson::pack).collect()
}

fn unpack_povm(effects: &[OperatorJson]) -> Result<Povm> {
    let ops = effects.iter().map(OperatorJson::unpack).collect::<Result<Vec<_>>>()?;
    Povm::with_tolerance(ops, tol::SERIALIZED)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ResourceJson {
    pub d_c: usize,
    pub alice_factors: usize,
    pub message_kind: MessageKind,
    pub shared_state: OperatorJson,
}

impl ResourceJson {
    pub fn pack(r: &ResourceSpec) -> Self {
        ResourceJson {
            d_c: r.d_c(),
            alice_factors: r.alice_factors(),
            message_kind: r.message_kind(),
            shared_state: OperatorJson::pack(r.shared_state()),
        }
    }

    pub fn unpack(&self) -> Result<ResourceSpec> {
        ResourceSpec::new(
            self.d_c,
            self.shared_state.unpack()?,
            self.alice_factors,
            self.message_kind,
        )
    }
}

/// A full protocol, tagged by message type.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "message", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProtocolJson {
    Classical {
        resource: ResourceJson,
        /// One effect per message value.
        encoder: Vec<OperatorJson>,
        /// `decoders[c][y]`: channel applied for message `c`, input `y`.
        decoders: Vec<Vec<ChoiJson>>,
    },
    Quantum {
        resource: ResourceJson,
        encoder: ChoiJson,
        /// One channel per receiver input `y`.
        decoders: Vec<ChoiJson>,
    },
}

pub fn pack_protocol(p: &Protocol) -> ProtocolJson {
    match p {
        Protocol::Classical(p) => ProtocolJson::Classical {
            resource: ResourceJson::pack(p.resource()),
            encoder: pack_povm(p.encoder()),
            decoders: p
                .decoders()
                .iter()
                .map(|row| row.iter().map(ChoiJson::pack).collect())
                .collect(),
        },
        Protocol::Quantum(p) => ProtocolJson::Quantum {
            resource: ResourceJson::pack(p.resource()),
            encoder: ChoiJson::pack(p.encoder()),
            decoders: p.decoders().iter().map(ChoiJson::pack).collect(),
        },
    }
}

pub fn unpack_protocol(j: &ProtocolJson) -> Result<Protocol> {
    match j {
        ProtocolJson::Classical { resource, encoder, decoders } => {
            let decoders = decoders
                .iter()
                .map(|row| row.iter().map(ChoiJson::unpack).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?;
            Ok(Protocol::Classical(ClassicalProtocol::new(
                resource.unpack()?,
                unpack_povm(encoder)?,
                decoders,
            )?))
        }
        ProtocolJson::Quantum { resource, encoder, decoders } => {
            let decoders =
                decoders.iter().map(ChoiJson::unpack).collect::<Result<Vec<_>>>()?;
            Ok(Protocol::Quantum(QuantumProtocol::new(
                resource.unpack()?,
                encoder.unpack()?,
                decoders,
            )?))
        }
    }
}

/// An entangled random-access-code strategy: shared state, one encoding
/// POVM per data string, one decoding POVM per `(slot, message)`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RacJson {
    pub n: usize,
    pub d: usize,
    pub shared: OperatorJson,
    pub alice: Vec<Vec<OperatorJson>>,
    pub bob: Vec<Vec<Vec<OperatorJson>>>,
}

pub fn pack_rac(q: &QuantumRac) -> RacJson {
    RacJson {
        n: q.n(),
        d: q.d(),
        shared: OperatorJson::pack(q.shared()),
        alice: q.alice().iter().map(pack_povm).collect(),
        bob: q
            .bob()
            .iter()
            .map(|row| row.iter().map(pack_povm).collect())
            .collect(),
    }
}

pub fn unpack_rac(j: &RacJson) -> Result<QuantumRac> {
    let alice = j.alice.iter().map(|p| unpack_povm(p)).collect::<Result<Vec<_>>>()?;
    let bob = j
        .bob
        .iter()
        .map(|row| row.iter().map(|p| unpack_povm(p)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    QuantumRac::new(j.n, j.d, j.shared.unpack()?, alice, bob)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::init_measurement;
    use crate::quantum::{max_entangled, random_choi};
    use crate::tensor::Dims;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn classical_protocol_round_trips_exactly() {
        let p = Protocol::Classical(
            crate::protocols::standard_teleport_protocol(2).unwrap(),
        );
        let text = serde_json::to_string(&pack_protocol(&p)).unwrap();
        let back: ProtocolJson = serde_json::from_str(&text).unwrap();
        let q = unpack_protocol(&back).unwrap();
        let (a, b) = match (&p, &q) {
            (Protocol::Classical(a), Protocol::Classical(b)) => (a, b),
            _ => unreachable!(),
        };
        // JSON float round-trips are exact, so the matrices must be too
        for (x, y) in a.encoder().elements().iter().zip(b.encoder().elements()) {
            assert_eq!(x.max_abs_diff(y), 0.0);
        }
        for (rx, ry) in a.decoders().iter().zip(b.decoders()) {
            for (x, y) in rx.iter().zip(ry) {
                assert_eq!(x.operator().max_abs_diff(y.operator()), 0.0);
            }
        }
    }

    #[test]
    fn quantum_protocol_round_trips_exactly() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let resource = ResourceSpec::new(
            2,
            max_entangled(2).unwrap().projector(),
            1,
            MessageKind::Quantum,
        )
        .unwrap();
        let encoder = random_choi(
            Dims::single(2).unwrap(),
            Dims::new(vec![2, 2]).unwrap(),
            8,
            &mut rng,
        )
        .unwrap();
        let decoders = vec![random_choi(
            Dims::single(2).unwrap(),
            Dims::new(vec![2, 2]).unwrap(),
            8,
            &mut rng,
        )
        .unwrap()];
        let p = Protocol::Quantum(
            QuantumProtocol::new(resource, encoder, decoders).unwrap(),
        );
        let text = serde_json::to_string(&pack_protocol(&p)).unwrap();
        let back = unpack_protocol(&serde_json::from_str(&text).unwrap()).unwrap();
        let (a, b) = match (&p, &back) {
            (Protocol::Quantum(a), Protocol::Quantum(b)) => (a, b),
            _ => unreachable!(),
        };
        // the JSON float round trip is exact; re-validation may symmetrize
        // the Hermitian part at rounding level
        assert!(
            a.encoder().operator().max_abs_diff(b.encoder().operator()) < 1e-15
        );
    }

    #[test]
    fn rac_strategy_round_trips() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let shared = max_entangled(2).unwrap().projector();
        let dims = Dims::single(2).unwrap();
        let alice = (0..16)
            .map(|_| init_measurement(&dims, 4, &mut rng).unwrap())
            .collect();
        let bob = (0..2)
            .map(|_| {
                (0..4)
                    .map(|_| init_measurement(&dims, 4, &mut rng).unwrap())
                    .collect()
            })
            .collect();
        let q = QuantumRac::new(2, 2, shared, alice, bob).unwrap();
        let text = serde_json::to_string(&pack_rac(&q)).unwrap();
        let back = unpack_rac(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back.n(), 2);
        assert_eq!(
            q.shared().max_abs_diff(back.shared()),
            0.0
        );
    }

    #[test]
    fn corrupted_povm_is_rejected() {
        let p = Protocol::Classical(
            crate::protocols::standard_teleport_protocol(2).unwrap(),
        );
        let mut packed = pack_protocol(&p);
        if let ProtocolJson::Classical { encoder, .. } = &mut packed {
            encoder[0].rows[0][0] = [0.9, 0.0];
        }
        assert!(unpack_protocol(&packed).is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"{"dims": [2], "rows": [[[1,0],[0,0]],[[0,0],[1,0]]], "extra": 1}"#;
        assert!(serde_json::from_str::<OperatorJson>(text).is_err());
    }
}
