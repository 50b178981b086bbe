//! Event kinds, schema variants and the shared description pool.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Lab,
    Chart,
    Prescription,
    Infusion,
}

impl EventKind {
    pub const ALL: [EventKind; 4] = [
        EventKind::Lab,
        EventKind::Chart,
        EventKind::Prescription,
        EventKind::Infusion,
    ];

    /// Relative emission frequency.
    pub(crate) fn weight(self) -> f64 {
        match self {
            EventKind::Lab => 0.35,
            EventKind::Chart => 0.35,
            EventKind::Prescription => 0.2,
            EventKind::Infusion => 0.1,
        }
    }
}

/// How a description relates to the latent risk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Signal {
    High,
    Low,
    Neutral,
}

/// `(kind, signal, description)`; the position in this table is the
/// description index used to build codes.
pub const DESCRIPTIONS: [(EventKind, Signal, &str); 48] = {
    use EventKind::*;
    use Signal::*;
    [
        (Lab, High, "Lactate"),
        (Lab, High, "Troponin I"),
        (Lab, High, "Creatinine"),
        (Lab, High, "Blood Urea Nitrogen"),
        (Lab, Low, "Albumin"),
        (Lab, Low, "Hemoglobin"),
        (Lab, Low, "Platelet Count"),
        (Lab, Low, "Calcium Total"),
        (Lab, Neutral, "Glucose"),
        (Lab, Neutral, "Sodium"),
        (Lab, Neutral, "Potassium"),
        (Lab, Neutral, "Chloride"),
        (Chart, High, "Respiratory Distress"),
        (Chart, High, "Tachycardia"),
        (Chart, High, "Hypotension"),
        (Chart, High, "Altered Mental Status"),
        (Chart, Low, "Ambulating Independently"),
        (Chart, Low, "Tolerating Diet"),
        (Chart, Low, "Pain Controlled"),
        (Chart, Low, "Alert and Oriented"),
        (Chart, Neutral, "Temperature"),
        (Chart, Neutral, "Heart Rate"),
        (Chart, Neutral, "Weight"),
        (Chart, Neutral, "Braden Score"),
        (Prescription, High, "Norepinephrine"),
        (Prescription, High, "Vancomycin"),
        (Prescription, High, "Piperacillin Tazobactam"),
        (Prescription, High, "Furosemide"),
        (Prescription, Low, "Acetaminophen"),
        (Prescription, Low, "Docusate Sodium"),
        (Prescription, Low, "Senna"),
        (Prescription, Low, "Multivitamin"),
        (Prescription, Neutral, "Heparin Sodium"),
        (Prescription, Neutral, "Pantoprazole"),
        (Prescription, Neutral, "Insulin Regular"),
        (Prescription, Neutral, "Ondansetron"),
        (Infusion, High, "Propofol"),
        (Infusion, High, "Vasopressin"),
        (Infusion, High, "Epinephrine"),
        (Infusion, High, "Midazolam"),
        (Infusion, Low, "Dextrose 5%"),
        (Infusion, Low, "Lactated Ringers"),
        (Infusion, Low, "Sodium Chloride 0.9%"),
        (Infusion, Low, "Potassium Chloride"),
        (Infusion, Neutral, "Fentanyl Citrate"),
        (Infusion, Neutral, "Insulin Drip"),
        (Infusion, Neutral, "Magnesium Sulfate"),
        (Infusion, Neutral, "Phenylephrine"),
    ]
};

/// Naming and layout of events in one hospital-system family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemaVariant {
    Mimic3,
    Mimic4,
    Eicu,
}

/// Where the coded value and the numeric value go in an event.
#[derive(Debug, Clone, Copy)]
pub struct EventLayout {
    pub event_type: &'static str,
    pub code_field: &'static str,
    pub value_field: &'static str,
    pub value_first: bool,
}

impl SchemaVariant {
    pub const ALL: [SchemaVariant; 3] = [SchemaVariant::Mimic3, SchemaVariant::Mimic4, SchemaVariant::Eicu];

    pub fn family(self) -> &'static str {
        match self {
            SchemaVariant::Mimic3 => "mimic3",
            SchemaVariant::Mimic4 => "mimic4",
            SchemaVariant::Eicu => "eicu",
        }
    }

    pub fn layout(self, kind: EventKind) -> EventLayout {
        use EventKind::*;
        let (event_type, code_field, value_field, value_first) = match (self, kind) {
            (SchemaVariant::Mimic3, Lab) => ("LABEVENTS", "ITEMID", "VALUENUM", false),
            (SchemaVariant::Mimic3, Chart) => ("CHARTEVENTS", "ITEMID", "VALUENUM", false),
            (SchemaVariant::Mimic3, Prescription) => ("PRESCRIPTIONS", "DRUG", "DOSE_VAL_RX", false),
            (SchemaVariant::Mimic3, Infusion) => ("INPUTEVENTS_MV", "ITEMID", "AMOUNT", false),
            (SchemaVariant::Mimic4, Lab) => ("labevents", "itemid", "valuenum", false),
            (SchemaVariant::Mimic4, Chart) => ("chartevents", "itemid", "valuenum", false),
            (SchemaVariant::Mimic4, Prescription) => ("emar", "medication", "dose_given", false),
            (SchemaVariant::Mimic4, Infusion) => ("inputevents", "itemid", "amount", false),
            (SchemaVariant::Eicu, Lab) => ("lab", "labname", "labresult", true),
            (SchemaVariant::Eicu, Chart) => ("nursecharting", "celllabel", "cellvalue", true),
            (SchemaVariant::Eicu, Prescription) => ("medication", "drugname", "dosage", false),
            (SchemaVariant::Eicu, Infusion) => ("infusiondrug", "drugname", "drugrate", true),
        };
        EventLayout { event_type, code_field, value_field, value_first }
    }

    /// Client-unique code for a description.
    pub fn code(self, client_id: u32, description_index: usize) -> alloc::string::String {
        match self {
            SchemaVariant::Mimic3 => alloc::format!("{}", 200_000 + client_id as u64 * 1000 + description_index as u64),
            SchemaVariant::Mimic4 => alloc::format!("{}", 5_000_000 + client_id as u64 * 1000 + description_index as u64),
            SchemaVariant::Eicu => alloc::format!("E{client_id}-{description_index:03}"),
        }
    }

    pub fn for_client(client_id: u32) -> Self {
        Self::ALL[client_id as usize % Self::ALL.len()]
    }
}
