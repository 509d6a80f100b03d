use aqm_core::algebra::{
    is_stable, masa_from_pair, Character, ContextFamily, ContextId, ElementaryState, Observable,
};
use aqm_core::linalg::{pauli_x, pauli_z, CMatrix};
use aqm_core::AqmError;

fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

fn eye2() -> CMatrix {
    CMatrix::identity(2, 2)
}

/// `σ_z ⊗ I` sits in a Z-Z context and a Z-X context.
fn two_qubit_family() -> (Observable, ContextFamily) {
    let za = Observable::new(kron(&pauli_z(), &eye2())).unwrap();
    let zb = Observable::new(kron(&eye2(), &pauli_z())).unwrap();
    let xb = Observable::new(kron(&eye2(), &pauli_x())).unwrap();
    let zz = masa_from_pair("zz", &za, &zb).unwrap();
    let zx = masa_from_pair("zx", &za, &xb).unwrap();
    (za, ContextFamily::from_contexts([zz, zx]).unwrap())
}

fn chi(id: &str, branch: usize) -> Character {
    Character {
        context_id: ContextId::from(id),
        branch,
    }
}

/// Branch of `q` on which `a` takes `value`.
fn branch_with(family: &ContextFamily, id: &str, a: &Observable, value: f64) -> usize {
    let q = family.get(&ContextId::from(id)).unwrap();
    q.branch_values(a)
        .unwrap()
        .iter()
        .position(|v| (v - value).abs() < 1e-9)
        .unwrap()
}

#[test]
fn both_contexts_are_maximal_and_contain_the_shared_observable() {
    let (za, family) = two_qubit_family();
    assert_eq!(family.len(), 2);
    assert_eq!(family.dim(), Some(4));
    for q in family.iter() {
        assert!(q.is_maximal());
        assert!(q.contains(&za, 1e-10).unwrap());
    }
    assert_eq!(family.containing(&za, 1e-10).unwrap().len(), 2);
}

#[test]
fn agreeing_characters_are_stable() {
    let (za, family) = two_qubit_family();
    for value in [1.0, -1.0] {
        let phi = ElementaryState::from_characters(
            &family,
            [
                chi("zz", branch_with(&family, "zz", &za, value)),
                chi("zx", branch_with(&family, "zx", &za, value)),
            ],
        )
        .unwrap();
        assert!(is_stable(&phi, &za, &family, 1e-9).unwrap());
    }
}

#[test]
fn disagreeing_characters_are_unstable() {
    let (za, family) = two_qubit_family();
    let phi = ElementaryState::from_characters(
        &family,
        [
            chi("zz", branch_with(&family, "zz", &za, 1.0)),
            chi("zx", branch_with(&family, "zx", &za, -1.0)),
        ],
    )
    .unwrap();
    assert!(!is_stable(&phi, &za, &family, 1e-9).unwrap());
}

#[test]
fn lazily_filled_state_is_indeterminate_until_complete() {
    let (za, family) = two_qubit_family();
    let mut phi = ElementaryState::new();
    phi.assign(&family, chi("zz", 0)).unwrap();
    assert!(matches!(
        is_stable(&phi, &za, &family, 1e-9),
        Err(AqmError::Indeterminate(_))
    ));
    let b = branch_with(
        &family,
        "zx",
        &za,
        family
            .get(&ContextId::from("zz"))
            .unwrap()
            .evaluate(&chi("zz", 0), &za)
            .unwrap(),
    );
    phi.assign(&family, chi("zx", b)).unwrap();
    assert_eq!(phi.len(), 2);
    assert!(is_stable(&phi, &za, &family, 1e-9).unwrap());
}

#[test]
fn invalid_assignments_and_family_inserts_are_rejected() {
    let (_, mut family) = two_qubit_family();
    let mut phi = ElementaryState::new();
    assert!(matches!(
        phi.assign(&family, chi("nope", 0)),
        Err(AqmError::UnknownContext(_))
    ));
    assert!(phi.assign(&family, chi("zz", 4)).is_err());
    assert!(phi.is_empty());

    let za = Observable::new(kron(&pauli_z(), &eye2())).unwrap();
    let zb = Observable::new(kron(&eye2(), &pauli_z())).unwrap();
    let dup = masa_from_pair("zz", &za, &zb).unwrap();
    assert!(matches!(
        family.insert(dup),
        Err(AqmError::DuplicateContext(_))
    ));
    let small = masa_from_pair(
        "q",
        &Observable::new(pauli_z()).unwrap(),
        &Observable::identity(2),
    )
    .unwrap();
    assert!(family.insert(small).is_err());
}
