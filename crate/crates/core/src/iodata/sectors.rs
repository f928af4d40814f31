use std::fmt;

/// Sector type vocabulary used to colour-code sectors in the WIOD sector list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SectorGroup {
    Agriculture,
    Mining,
    Manufacturing,
    ElectricityWater,
    Construction,
    Trade,
    Transport,
    Accommodation,
    InformationCommunication,
    Finance,
    Research,
    Administration,
    Other,
}

impl SectorGroup {
    pub fn label(self) -> &'static str {
        match self {
            SectorGroup::Agriculture => "Agriculture",
            SectorGroup::Mining => "Mining",
            SectorGroup::Manufacturing => "Manufacturing",
            SectorGroup::ElectricityWater => "Electricity & Water",
            SectorGroup::Construction => "Construction",
            SectorGroup::Trade => "Trade",
            SectorGroup::Transport => "Transport",
            SectorGroup::Accommodation => "Accommodation",
            SectorGroup::InformationCommunication => "Inform. & Comm.",
            SectorGroup::Finance => "Finance",
            SectorGroup::Research => "Research",
            SectorGroup::Administration => "Administration",
            SectorGroup::Other => "Other",
        }
    }
}

impl fmt::Display for SectorGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

use SectorGroup::*;

/// The 56 WIOD (2016 release) sectors: ISIC rev. 4 code, short name, group.
pub const WIOD_SECTORS: [(&str, &str, SectorGroup); 56] = [
    ("A01", "Agriculture", Agriculture),
    ("A02", "Forestry", Agriculture),
    ("A03", "Fishing", Agriculture),
    ("B", "Mining", Mining),
    ("C10-C12", "Food", Manufacturing),
    ("C13-C15", "Textiles", Manufacturing),
    ("C16", "Wood", Manufacturing),
    ("C17", "Paper", Manufacturing),
    ("C18", "Printing", Manufacturing),
    ("C19", "Coke", Manufacturing),
    ("C20", "Chemicals", Manufacturing),
    ("C21", "Pharmaceuticals", Manufacturing),
    ("C22", "Rubber", Manufacturing),
    ("C23", "Mineral products", Manufacturing),
    ("C24", "Metals", Manufacturing),
    ("C25", "Metal products", Manufacturing),
    ("C26", "Computer", Manufacturing),
    ("C27", "Electricals", Manufacturing),
    ("C28", "Machinery", Manufacturing),
    ("C29", "Motor vehicles", Manufacturing),
    ("C30", "Transport equ.", Manufacturing),
    ("C31-C32", "Furniture", Manufacturing),
    ("C33", "Repair", Manufacturing),
    ("D35", "Electricity", ElectricityWater),
    ("E36", "Water", ElectricityWater),
    ("E37-E39", "Waste", ElectricityWater),
    ("F", "Construction", Construction),
    ("G45", "Car trade", Trade),
    ("G46", "Wholesale trade", Trade),
    ("G47", "Retail trade", Trade),
    ("H49", "Land transport", Transport),
    ("H50", "Water transport", Transport),
    ("H51", "Air transport", Transport),
    ("H52", "Warehousing", Transport),
    ("H53", "Post", Transport),
    ("I", "Accommodation", Accommodation),
    ("J58", "Publishing", InformationCommunication),
    ("J59-J60", "Entertainment", InformationCommunication),
    ("J61", "Telecommunication", InformationCommunication),
    ("J62-J63", "Computer programming", InformationCommunication),
    ("K64", "Financial services", Finance),
    ("K65", "Insurance", Finance),
    ("K66", "Auxiliary financial serv.", Finance),
    ("L68", "Real estate", Other),
    ("M69-M70", "Legal activities", Other),
    ("M71", "Architecture", Other),
    ("M72", "Research", Research),
    ("M73", "Advertising", Research),
    ("M74-M75", "Other technical activities", Research),
    ("N", "Administration", Administration),
    ("O84", "Public administration", Administration),
    ("P85", "Education", Other),
    ("Q", "Health", Other),
    ("R-S", "Other services", Other),
    ("T", "Household activities", Other),
    ("U", "Extraterritorial org.", Other),
];

/// EU member states covered by WIOD (2016 release), ISO-3 codes.
pub const EU28: [&str; 28] = [
    "AUT", "BEL", "BGR", "CYP", "CZE", "DEU", "DNK", "ESP", "EST", "FIN", "FRA", "GBR", "GRC",
    "HRV", "HUN", "IRL", "ITA", "LTU", "LUX", "LVA", "MLT", "NLD", "POL", "PRT", "ROU", "SVK",
    "SVN", "SWE",
];

/// WIOD writes composite codes with underscores (`C10-C12` appears as
/// `C10_C12`, `C31_C32` and so on); both spellings resolve to the catalog entry.
pub fn canonical_code(code: &str) -> String {
    let code = code.trim().replace('_', "-");
    match code.as_str() {
        "C31-32" => "C31-C32".to_string(),
        _ => code,
    }
}

pub fn lookup(code: &str) -> Option<(&'static str, &'static str, SectorGroup)> {
    let canon = canonical_code(code);
    WIOD_SECTORS.iter().copied().find(|(c, _, _)| *c == canon)
}

/// One sector of a national table.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SectorId {
    pub code: String,
    pub index: usize,
    pub short_name: String,
    pub group: SectorGroup,
}

impl SectorId {
    /// Known WIOD codes pick up their catalog name and group; anything else
    /// keeps its code as the name and falls into `Other`.
    pub fn new(code: &str, index: usize) -> Self {
        match lookup(code) {
            Some((canon, short, group)) => SectorId {
                code: canon.to_string(),
                index,
                short_name: short.to_string(),
                group,
            },
            None => SectorId {
                code: code.trim().to_string(),
                index,
                short_name: code.trim().to_string(),
                group: SectorGroup::Other,
            },
        }
    }
}
