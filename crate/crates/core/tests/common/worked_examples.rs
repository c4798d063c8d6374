//! Generation examples as printed, wrapped lines and model noise included.

pub const LIFTS_THE_PAPER: &str = "Before: The paper lies flat \non a table, surrounded by \nother papers and office supplies.\n\nAfter: The paper is now in \nC's hand, with the surrounding\narea slightly rearranged.\n\nCF 1: The paper remains flat \non the table, untouched.\n\nCF 2: A corner of the paper \nis folded up, but the rest remains flat.\n\nCF 3: The paper has been torn in \nhalf, with one half on the table \nand the other half on the floor.\n";

pub const MOVES_HER_HAND: &str = "Before: C's hand is still in a \nneutral position, with her \narm relaxed by her side.\n\nAfter: C's hand is now in motion, \nwith her fingers waving \ngently in the air.\n\nCF 1: C's hand remains still, \nwith no movement.\n\nCF 2: C's hand is stuck in a \nawkward position, with her fingers\ncurled up and her wrist twisted.\n\nCF 3: C's hand has moved to a completely \ndifferent location, with her \narm now stretched out to the side.\n";

// CF 2 follows CF 1 without a blank line and ends in a stray quote
pub const FIXES_THE_CAMERA: &str = "Before: The camera is not \nfunctioning properly, with \na loose screw visible.\n\nAfter: The camera is now securely \nattached to C's head, with \nthe loose screw tightened.\n\nCF 1: The camera remains \nloose, still not functioning properly.\nCF 2: A makeshift fix is \nattempted, with tape holding\nthe camera in place.\"\n\nCF 3: The camera is now dangling\nprecariously from C's head,\nheld by a length of twine.\n";

pub const MISSING_STEP: &str = "[K-CF 1]: C was in a room. \nC constructed a new structure \nwith the paperwork pieces.\n\n[K-CF 2]: C was in a room. \nC removed small pieces from \na paperwork with a tool. #summary\n";

pub const MISORDERED: &str = "[M-CF 1]: C was in a room.\nC constructed a new structure with\nthe paperwork pieces. \nC removed small pieces from the \npaperwork to create the craft.\n\n[M-CF 2]: C was in a room. \nC removed small pieces from \nthe paperwork with a tool. \nC constructed a new structure with\nthe paperwork pieces and \nconnected them to the craft material.\n";
