//! C ABI for the solver library.
//!
//! Instances travel as JSON strings and live behind an opaque handle;
//! results come back as newly allocated JSON strings the caller releases
//! with [`nlc_string_free`]. Every entry point returns an [`NlcStatus`]
//! code and never unwinds across the boundary.

use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nlcover::model::{
    is_feasible, solution_cost, validate, Instance, IntegralSolution, Rat, SolutionFile,
    ValidationIssue,
};
use nlcover::oracles::{brute_force_kc, brute_force_ufp, exact_kc};
use nlcover::pd_kc::{check_certificate_kc, solve_pd_kc, PdKcResult};
use nlcover::pd_ufp::{check_certificate_ufp, solve_pd_ufp, PdUfpResult};

/// Result codes; zero is success. `Infeasible` and `CheckFailed` mirror the
/// CLI exit codes 3 and 4.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NlcStatus {
    Ok = 0,
    /// The JSON could not be parsed.
    ParseError = 1,
    /// The instance or an argument is structurally invalid.
    Invalid = 2,
    /// The instance cannot be covered with finite cost.
    Infeasible = 3,
    /// A solution or certificate check failed.
    CheckFailed = 4,
    /// A required pointer argument was null.
    NullArgument = 5,
    /// A string argument was not valid UTF-8.
    Utf8Error = 6,
    /// The algorithm name is not recognized.
    UnknownAlgorithm = 7,
    /// The algorithm does not apply to this instance kind.
    WrongInstanceKind = 8,
    /// An internal invariant failed.
    InternalError = 9,
}

/// Opaque parsed instance.
pub struct NlcInstance {
    inner: Instance,
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

unsafe fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, NlcStatus> {
    if ptr.is_null() {
        return Err(NlcStatus::NullArgument);
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| NlcStatus::Utf8Error)
}

fn guarded(f: impl FnOnce() -> NlcStatus) -> NlcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => NlcStatus::InternalError,
    }
}

/// Parses an instance from JSON into an opaque handle. On success writes
/// the handle to `out` and returns `Ok`; the caller frees it with
/// [`nlc_instance_free`].
///
/// # Safety
/// `json` must point to a NUL-terminated string and `out` to writable
/// storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn nlc_instance_parse(
    json: *const c_char,
    out: *mut *mut NlcInstance,
) -> NlcStatus {
    if out.is_null() {
        return NlcStatus::NullArgument;
    }
    let body = match read_str(json) {
        Ok(s) => s,
        Err(status) => return status,
    };
    guarded(|| match serde_json::from_str::<Instance>(body) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(NlcInstance { inner }));
            NlcStatus::Ok
        }
        Err(_) => NlcStatus::ParseError,
    })
}

/// Releases a handle returned by [`nlc_instance_parse`]. Null is a no-op.
///
/// # Safety
/// `inst` must be a handle from [`nlc_instance_parse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nlc_instance_free(inst: *mut NlcInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

fn validation_status(issues: &[ValidationIssue]) -> NlcStatus {
    let feasibility_only = issues.iter().all(|i| {
        matches!(
            i,
            ValidationIssue::InfeasibleDemand { .. } | ValidationIssue::UncoverablePoint { .. }
        )
    });
    if feasibility_only {
        NlcStatus::Infeasible
    } else {
        NlcStatus::Invalid
    }
}

/// Validates the instance. Returns `Ok` when well-formed and feasible;
/// otherwise returns `Invalid` or `Infeasible` and, when `out_report` is
/// non-null, writes a JSON array of human-readable issue strings.
///
/// # Safety
/// `inst` must be a live handle; `out_report` may be null or point to
/// writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn nlc_instance_validate(
    inst: *const NlcInstance,
    out_report: *mut *mut c_char,
) -> NlcStatus {
    if inst.is_null() {
        return NlcStatus::NullArgument;
    }
    let instance = &(*inst).inner;
    guarded(|| {
        let report = validate(instance);
        if !out_report.is_null() {
            let issues: Vec<String> = report.issues.iter().map(|i| i.to_string()).collect();
            *out_report = to_c_string(serde_json::to_string(&issues).unwrap_or_default());
        }
        if report.ok() {
            NlcStatus::Ok
        } else {
            validation_status(&report.issues)
        }
    })
}

enum SolveOutcome {
    Plain(IntegralSolution),
    Certified(IntegralSolution, nlcover::engine::Certificate),
}

fn dispatch_solve(instance: &Instance, algo: &str, audit: bool) -> Result<SolveOutcome, NlcStatus> {
    match (instance, algo) {
        (Instance::Kc(kc), "pd-kc") => match solve_pd_kc(kc, audit) {
            Ok(res) => Ok(SolveOutcome::Certified(res.solution, res.certificate)),
            Err(nlcover::pd_kc::PdError::Infeasible(_)) => Err(NlcStatus::Infeasible),
            Err(_) => Err(NlcStatus::InternalError),
        },
        (Instance::Ufp(ufp), "pd-ufp") => match solve_pd_ufp(ufp, audit) {
            Ok(res) => Ok(SolveOutcome::Certified(res.solution, res.certificate)),
            Err(nlcover::pd_kc::PdError::Infeasible(_)) => Err(NlcStatus::Infeasible),
            Err(_) => Err(NlcStatus::InternalError),
        },
        (Instance::Kc(kc), "dp") => match exact_kc(kc) {
            Ok((_, sol)) => Ok(SolveOutcome::Plain(sol)),
            Err(_) => Err(NlcStatus::Infeasible),
        },
        (Instance::Kc(kc), "brute") => {
            match brute_force_kc(kc, kc.demand, nlcover::oracles::DEFAULT_ENUMERATION_BUDGET) {
                Ok((_, sol)) => Ok(SolveOutcome::Plain(sol)),
                Err(nlcover::oracles::OracleError::Infeasible) => Err(NlcStatus::Infeasible),
                Err(_) => Err(NlcStatus::Invalid),
            }
        }
        (Instance::Ufp(ufp), "brute") => match brute_force_ufp(
            ufp,
            ufp.max_demand(),
            nlcover::oracles::DEFAULT_ENUMERATION_BUDGET,
        ) {
            Ok((_, sol)) => Ok(SolveOutcome::Plain(sol)),
            Err(nlcover::oracles::OracleError::Infeasible) => Err(NlcStatus::Infeasible),
            Err(_) => Err(NlcStatus::Invalid),
        },
        (Instance::Kc(kc), "round") => match nlcover::lp_round::round_2apx(kc) {
            Ok(res) => Ok(SolveOutcome::Plain(res.solution)),
            Err(nlcover::lp_round::LpError::Infeasible(_)) => Err(NlcStatus::Infeasible),
            Err(_) => Err(NlcStatus::InternalError),
        },
        (_, "pd-kc" | "pd-ufp" | "dp" | "round") => Err(NlcStatus::WrongInstanceKind),
        _ => Err(NlcStatus::UnknownAlgorithm),
    }
}

/// Solves the instance with the named algorithm (`"pd-kc"`, `"pd-ufp"`,
/// `"dp"`, `"brute"`, or `"round"`). Writes the solution JSON
/// (`{"levels": [...], "cost": ...}`) to `out_solution`. When `audit` is
/// nonzero and the algorithm is primal-dual, also writes the certificate
/// JSON to `out_certificate` (if non-null).
///
/// # Safety
/// `inst` must be a live handle, `algo` a NUL-terminated string,
/// `out_solution` writable; `out_certificate` may be null.
#[no_mangle]
pub unsafe extern "C" fn nlc_solve(
    inst: *const NlcInstance,
    algo: *const c_char,
    audit: i32,
    out_solution: *mut *mut c_char,
    out_certificate: *mut *mut c_char,
) -> NlcStatus {
    if inst.is_null() || out_solution.is_null() {
        return NlcStatus::NullArgument;
    }
    let algo = match read_str(algo) {
        Ok(s) => s,
        Err(status) => return status,
    };
    let instance = &(*inst).inner;
    guarded(|| {
        let report = validate(instance);
        if !report.ok() {
            return validation_status(&report.issues);
        }
        let outcome = match dispatch_solve(instance, algo, audit != 0) {
            Ok(o) => o,
            Err(status) => return status,
        };
        let (solution, certificate) = match outcome {
            SolveOutcome::Plain(sol) => (sol, None),
            SolveOutcome::Certified(sol, cert) => (sol, Some(cert)),
        };
        let cost = match solution_cost(instance, &solution) {
            Ok(c) => c,
            Err(_) => return NlcStatus::InternalError,
        };
        let file = SolutionFile {
            levels: solution.levels,
            cost,
        };
        *out_solution = to_c_string(serde_json::to_string(&file).unwrap_or_default());
        if let (Some(cert), false) = (certificate, out_certificate.is_null()) {
            *out_certificate = to_c_string(serde_json::to_string(&cert).unwrap_or_default());
        }
        NlcStatus::Ok
    })
}

/// Checks a solution (and, when given, its dual certificate) against the
/// instance. Returns `Ok` when everything holds, `CheckFailed` otherwise;
/// `out_witness` (if non-null) receives a human-readable explanation.
///
/// # Safety
/// `inst` must be a live handle and `solution_json` NUL-terminated;
/// `certificate_json` and `out_witness` may be null.
#[no_mangle]
pub unsafe extern "C" fn nlc_verify(
    inst: *const NlcInstance,
    solution_json: *const c_char,
    certificate_json: *const c_char,
    out_witness: *mut *mut c_char,
) -> NlcStatus {
    if inst.is_null() {
        return NlcStatus::NullArgument;
    }
    let solution_body = match read_str(solution_json) {
        Ok(s) => s,
        Err(status) => return status,
    };
    let certificate_body = if certificate_json.is_null() {
        None
    } else {
        match read_str(certificate_json) {
            Ok(s) => Some(s),
            Err(status) => return status,
        }
    };
    let instance = &(*inst).inner;
    guarded(|| {
        let witness = |msg: String| {
            if !out_witness.is_null() {
                *out_witness = to_c_string(msg);
            }
        };
        let file: SolutionFile = match serde_json::from_str(solution_body) {
            Ok(f) => f,
            Err(_) => return NlcStatus::ParseError,
        };
        let solution = IntegralSolution {
            levels: file.levels.clone(),
        };
        if !is_feasible(instance, &solution) {
            witness("solution does not cover the demand".into());
            return NlcStatus::CheckFailed;
        }
        match solution_cost(instance, &solution) {
            Ok(actual) if actual == file.cost => {}
            Ok(actual) => {
                witness(format!(
                    "declared cost {} but the levels cost {actual}",
                    file.cost
                ));
                return NlcStatus::CheckFailed;
            }
            Err(e) => {
                witness(e.to_string());
                return NlcStatus::CheckFailed;
            }
        }
        if let Some(body) = certificate_body {
            let certificate: nlcover::engine::Certificate = match serde_json::from_str(body) {
                Ok(c) => c,
                Err(_) => return NlcStatus::ParseError,
            };
            let Some(primal) = file.cost.finite().cloned() else {
                witness("certificates require a finite cost".into());
                return NlcStatus::CheckFailed;
            };
            let failures = match instance {
                Instance::Kc(kc) => {
                    let result = PdKcResult {
                        solution,
                        primal_cost: primal.clone(),
                        ratio_bound_ok: primal
                            <= Rat::from_integer(2.into()) * certificate.dual_objective.clone(),
                        certificate,
                    };
                    check_certificate_kc(kc, &result).failures
                }
                Instance::Ufp(ufp) => {
                    let result = PdUfpResult {
                        solution,
                        primal_cost: primal.clone(),
                        ratio_bound_ok: primal
                            <= Rat::from_integer(4.into()) * certificate.dual_objective.clone(),
                        certificate,
                        prune_log: Vec::new(),
                    };
                    check_certificate_ufp(ufp, &result).failures
                }
            };
            if !failures.is_empty() {
                let msg = failures
                    .iter()
                    .map(|f| f.to_string())
                    .collect::<Vec<_>>()
                    .join("; ");
                witness(msg);
                return NlcStatus::CheckFailed;
            }
        }
        NlcStatus::Ok
    })
}

/// Releases a string returned by this library. Null is a no-op.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn nlc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn nlc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}
